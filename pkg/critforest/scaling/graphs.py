"""Simple graphs on the labels 0..N-1, forests, and a union-find over the labels."""
from typing import FrozenSet, Iterable, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from critforest.scaling import settings
from critforest.scaling.errors import ValidationError

Edge = Tuple[int, int]


class UnionFind:
    def __init__(self, size: int):
        if size < 0:
            raise ValueError('size must be non-negative')
        self.parent = np.arange(size, dtype=np.int64)
        self._size = np.ones(size, dtype=np.int64)

    @classmethod
    def from_edges(cls, size: int, edges: Iterable[Edge]) -> 'UnionFind':
        """Union-find holding the given edges; raises ValidationError on a cycle"""
        union_find = cls(size)
        for u, v in edges:
            if not union_find.union(int(u), int(v)):
                raise ValidationError(f'edge ({u}, {v}) closes a cycle')
        return union_find

    def copy(self) -> 'UnionFind':
        other = UnionFind(0)
        other.parent = self.parent.copy()
        other._size = self._size.copy()
        return other

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return int(x)

    def union(self, a: int, b: int) -> bool:
        ra = self.find(a)
        rb = self.find(b)
        if ra == rb:
            return False
        size = self._size
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        size[ra] += size[rb]
        return True

    def component_size(self, x: int) -> int:
        return int(self._size[self.find(x)])


def slot_offsets(N: int) -> np.ndarray:
    """Code of the first slot (u, u+1) of every row u in row-major upper-triangle order"""
    u = np.arange(N, dtype=np.int64)
    return u * (N - 1) - u * (u - 1) // 2


def decode_slots(N: int, codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    offsets = slot_offsets(N)
    u = np.searchsorted(offsets, codes, side='right') - 1
    v = codes - offsets[u] + u + 1
    return np.stack([u, v], axis=1)


def encode_slots(N: int, edges: np.ndarray) -> np.ndarray:
    edges = np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)
    return slot_offsets(N)[edges[:, 0]] + edges[:, 1] - edges[:, 0] - 1


class Graph:
    """Graph on {0..N-1}; edges are stored as (u, v) rows with u <= v in insertion order."""

    def __init__(self, n_vertices: int, edges=None):
        if n_vertices < 0:
            raise ValidationError(f'vertex count must be non-negative, got {n_vertices}')
        edges = np.empty((0, 2), dtype=np.int64) if edges is None else edges
        edges = np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)
        if len(edges) and (edges.min() < 0 or edges.max() >= n_vertices):
            raise ValidationError(f'edge labels must lie in [0, {n_vertices})')
        self.n_vertices = int(n_vertices)
        self.edges = edges
        self.edges.flags.writeable = False

    @classmethod
    def from_codes(cls, n_vertices: int, codes: np.ndarray, **kwargs) -> 'Graph':
        return cls(n_vertices, decode_slots(n_vertices, codes), **kwargs)

    def __repr__(self):
        return f'{self.__class__.__name__}(N={self.n_vertices}, edges={self.n_edges})'

    def __eq__(self, other):
        return (isinstance(other, Graph) and self.n_vertices == other.n_vertices
                and self.edge_set() == other.edge_set())

    def __hash__(self):
        return hash((self.n_vertices, self.key()))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def key(self) -> Tuple[Edge, ...]:
        """Identity of the edge set, usable as a dictionary key"""
        return tuple(sorted(map(tuple, self.edges.tolist())))

    def edge_set(self) -> FrozenSet[Edge]:
        return frozenset(map(tuple, self.edges.tolist()))

    def contains(self, other: 'Graph') -> bool:
        return self.n_vertices == other.n_vertices and other.edge_set() <= self.edge_set()

    def adjacency(self) -> csr_matrix:
        N = self.n_vertices
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        return csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(N, N))

    def neighbour_lists(self) -> Tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, indices) with every neighbour list in increasing order"""
        adjacency = self.adjacency()
        adjacency.sum_duplicates()
        adjacency.sort_indices()
        return adjacency.indptr, adjacency.indices

    def component_labels(self) -> Tuple[int, np.ndarray]:
        if self.n_vertices == 0:
            return 0, np.empty(0, dtype=np.int64)
        return connected_components(self.adjacency(), directed=False)

    def component_sizes(self) -> np.ndarray:
        """Component sizes in non-increasing order"""
        _, labels = self.component_labels()
        return np.sort(np.bincount(labels))[::-1] if len(labels) else np.empty(0, dtype=np.int64)

    def squared_sizes(self) -> int:
        return int(np.sum(self.component_sizes().astype(np.int64) ** 2))

    def is_forest(self) -> bool:
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            return False
        if len(np.unique(encode_slots(self.n_vertices, self.edges))) < self.n_edges:
            return False
        count, _ = self.component_labels()
        return count == self.n_vertices - self.n_edges


class Forest(Graph):
    """Acyclic graph. Validated with union-find when `validate` (or settings.VALIDATE_SAMPLES) is set."""

    def __init__(self, n_vertices: int, edges=None, validate: Optional[bool] = None):
        super().__init__(n_vertices, edges)
        validate = settings.VALIDATE_SAMPLES if validate is None else validate
        if validate:
            validate_forest(self)

    @classmethod
    def from_graph(cls, graph: Graph, validate: Optional[bool] = None) -> 'Forest':
        return cls(graph.n_vertices, graph.edges, validate=validate)


def validate_forest(graph: Graph, n_edges: Optional[int] = None):
    if n_edges is not None and graph.n_edges != n_edges:
        raise ValidationError(f'expected {n_edges} edges, got {graph.n_edges}')
    if graph.n_edges > max(graph.n_vertices - 1, 0):
        raise ValidationError(f'{graph.n_edges} edges on {graph.n_vertices} vertices')
    if np.any(graph.edges[:, 0] == graph.edges[:, 1]):
        raise ValidationError('self-edge in forest')
    UnionFind.from_edges(graph.n_vertices, graph.edges)
