"""Brute-force oracles over every graph on a handful of vertices.

Graphs are enumerated as bitmasks over the C(N,2) edge slots in row-major upper-triangle order, so the cost is
2^{C(N,2)} union-find passes: fine for N <= 6, hopeless beyond 7.
"""
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Dict, List, Optional, Tuple

from critforest.scaling.errors import DomainError

MAX_ENUMERATION_VERTICES = 7

Edge = Tuple[int, int]


def edge_slots(N: int) -> List[Edge]:
    return list(combinations(range(N), 2))


def _components(N: int, edges) -> Optional[List[int]]:
    """Component label per vertex, None when the edges close a cycle"""
    parent = list(range(N))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            return None
        parent[ru] = rv
    return [find(v) for v in range(N)]


@lru_cache(maxsize=None)
def all_forests(N: int) -> Tuple[Tuple[Edge, ...], ...]:
    """Every forest on {0..N-1} as a sorted edge tuple"""
    if N > MAX_ENUMERATION_VERTICES:
        raise DomainError(f'enumeration is limited to {MAX_ENUMERATION_VERTICES} vertices')
    slots = edge_slots(N)
    forests = []
    for mask in range(1 << len(slots)):
        edges = tuple(slot for bit, slot in enumerate(slots) if mask >> bit & 1)
        if len(edges) <= N - 1 and _components(N, edges) is not None:
            forests.append(edges)
    return tuple(forests)


def forest_counts(N: int) -> Dict[int, int]:
    """Exact f(N, m) for every m"""
    counts = Counter(len(forest) for forest in all_forests(N))
    return {m: counts.get(m, 0) for m in range(max(N, 1))}


def forests_with_edges(N: int, m: int) -> List[Tuple[Edge, ...]]:
    return [forest for forest in all_forests(N) if len(forest) == m]


def _weight(N: int, m: int, p) -> Fraction:
    p = Fraction(p)
    return p ** m * (1 - p) ** (N * (N - 1) // 2 - m)


def acyclic_probability(N: int, p) -> Fraction:
    return sum((_weight(N, len(forest), p) for forest in all_forests(N)), Fraction(0))


def stack_forest_size(N: int, forest, r: int) -> Optional[int]:
    """Total size of the trees holding labels 0..r-1, None when two of them share a tree"""
    labels = _components(N, forest)
    roots = [labels[v] for v in range(r)]
    if len(set(roots)) < r:
        return None
    return sum(1 for label in labels if label in set(roots))


def stack_forest_probability(N: int, r: int, k: int, p) -> Fraction:
    return sum((_weight(N, len(forest), p) for forest in all_forests(N) if stack_forest_size(N, forest, r) == k),
               Fraction(0))


def separated_probability(N: int, r: int, p) -> Fraction:
    """P(G(N, p) is a forest with labels 0..r-1 in distinct trees)"""
    return sum((_weight(N, len(forest), p) for forest in all_forests(N) if stack_forest_size(N, forest, r)),
               Fraction(0))


def all_trees(K: int) -> List[Tuple[Edge, ...]]:
    return forests_with_edges(K, K - 1)
