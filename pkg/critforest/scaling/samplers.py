"""Samplers for G(N, m), G(N, p), F(N, m), F(N, p) and uniform labelled trees, plus the coupling constructions.

Labels are 0..N-1. Every sampler takes an explicit numpy Generator and draws only from it.
"""
import heapq
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from critforest.scaling import settings
from critforest.scaling.combinatorics import LogCountTable, log_factorials
from critforest.scaling.errors import BoundUndefinedError, BudgetError, CapacityError, DomainError
from critforest.scaling.graphs import Forest, Graph, UnionFind

logger = logging.getLogger(__name__)

EXACT = 'exact'
REJECTION = 'rejection'
AUTO = 'auto'
STRATEGIES = (EXACT, REJECTION, AUTO)


def prufer_decode(sequence: Sequence[int], K: int) -> np.ndarray:
    """Edges of the labelled tree on {0..K-1} with the given Pruefer sequence"""
    if K < 2:
        return np.empty((0, 2), dtype=np.int64)
    degree = np.ones(K, dtype=np.int64)
    np.add.at(degree, np.asarray(sequence, dtype=np.int64), 1)
    leaves = [v for v in range(K) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in sequence:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return np.array(edges, dtype=np.int64)


def _tree_edges(K: int, rng: np.random.Generator) -> np.ndarray:
    return prufer_decode(rng.integers(0, K, size=max(K - 2, 0)).tolist(), K)


def sample_uniform_tree(K: int, rng: np.random.Generator) -> Forest:
    """Tree on {0..K-1}, uniform over the K^{K-2} labelled trees"""
    if K < 1:
        raise DomainError(f'a tree needs at least one vertex, got K={K}')
    return Forest(K, _tree_edges(K, rng))


def _check_strategy(strategy: str):
    if strategy not in STRATEGIES:
        raise DomainError(f'strategy must be one of {STRATEGIES}, got {strategy}')


def _resolve(table: Optional[LogCountTable], N: int, strategy: str) -> str:
    _check_strategy(strategy)
    if strategy == AUTO:
        return EXACT if table is not None and table.covers(N) else REJECTION
    if strategy == EXACT and (table is None or not table.covers(N)):
        raise CapacityError(N, 0 if table is None else table.max_vertices)
    return strategy


def total_slots(N: int) -> int:
    return N * (N - 1) // 2


def sample_gnm(N: int, m: int, rng: np.random.Generator) -> Graph:
    """Uniform m-subset of the C(N, 2) edge slots"""
    total = total_slots(N)
    if not 0 <= m <= total:
        raise DomainError(f'm must lie in [0, {total}], got {m}')
    codes = np.sort(rng.choice(total, size=m, replace=False)) if m else np.empty(0, dtype=np.int64)
    return Graph.from_codes(N, codes)


def sample_gnp(N: int, p: float, rng: np.random.Generator) -> Graph:
    """Independent p-coins on every slot; above SLOT_LIMIT slots a binomial count and a uniform subset"""
    if not 0 <= p <= 1:
        raise DomainError(f'p must lie in [0, 1], got {p}')
    total = total_slots(N)
    if total <= settings.SLOT_LIMIT:
        codes = np.flatnonzero(rng.random(total) < p)
    else:
        count = rng.binomial(total, p)
        codes = np.sort(rng.choice(total, size=count, replace=False))
    return Graph.from_codes(N, codes)


def sample_gnp_coupled(N: int, ps: Sequence[float], rng: np.random.Generator) -> List[Graph]:
    """G(N, p) for every p in ps, nested: a slot is present at p iff its shared uniform mark is below p"""
    ps = list(ps)
    if any(not 0 <= p <= 1 for p in ps):
        raise DomainError('every p must lie in [0, 1]')
    if not ps:
        return []
    total = total_slots(N)
    p_max = max(ps)
    if total <= settings.SLOT_LIMIT:
        codes = np.arange(total)
        marks = rng.random(total)
    else:
        codes = np.sort(rng.choice(total, size=rng.binomial(total, p_max), replace=False))
        marks = rng.uniform(0, p_max, size=len(codes))
    return [Graph.from_codes(N, codes[marks < p]) for p in ps]


def edge_count_law(table: LogCountTable, N: int, p: float) -> np.ndarray:
    """P(F(N, p) has m edges) for m = 0..N-1, proportional to f(N, m) (p / (1 - p))^m"""
    if not 0 < p < 1:
        raise DomainError(f'p must lie in (0, 1), got {p}')
    if not table.covers(N):
        raise CapacityError(N, table.max_vertices)
    row = table.row(N)
    logs = row + np.arange(len(row)) * (math.log(p) - math.log1p(-p))
    return np.exp(logs - logsumexp(logs))


def _sample_forest_exact(table: LogCountTable, N: int, m: int, rng: np.random.Generator) -> Forest:
    """Peel off the tree of the smallest unplaced label, its size k drawn with weight C(n-1, k-1) k^{k-2} f(n-k, .)"""
    lg = log_factorials(max(N, 1))
    log_k = np.log(np.arange(1, N + 1, dtype=float))
    remaining = np.arange(N)
    components = N - m
    pieces = []
    while len(remaining):
        n = len(remaining)
        ks = np.arange(1, n + 1)
        log_weights = (lg[n - 1] - lg[ks - 1] - lg[n - ks] + (ks - 2) * log_k[ks - 1]
                       + table.by_components(n - ks, components - 1))
        probs = np.exp(log_weights - logsumexp(log_weights))
        k = int(rng.choice(ks, p=probs / probs.sum()))
        chosen = np.concatenate([[0], rng.choice(np.arange(1, n), size=k - 1, replace=False)]).astype(np.int64)
        if k > 1:
            pieces.append(remaining[chosen][_tree_edges(k, rng)])
        remaining = np.delete(remaining, chosen)
        components -= 1
    edges = np.concatenate(pieces) if pieces else np.empty((0, 2), dtype=np.int64)
    return Forest(N, edges)


def _rejection(draw, what: str, budget: Optional[int] = None) -> Tuple[Graph, int]:
    budget = settings.REJECTION_BUDGET if budget is None else budget
    for attempt in range(1, budget + 1):
        graph = draw()
        if graph.is_forest():
            return graph, attempt
    raise BudgetError(f'no acyclic {what}', attempts=budget)


def sample_forest_nm(table: Optional[LogCountTable], N: int, m: int, rng: np.random.Generator,
                     strategy: str = AUTO) -> Forest:
    if N < 1 or not 0 <= m <= N - 1:
        raise DomainError(f'need 0 <= m <= N - 1, got N={N} m={m}')
    if _resolve(table, N, strategy) == EXACT:
        return _sample_forest_exact(table, N, m, rng)
    graph, attempts = _rejection(lambda: sample_gnm(N, m, rng), f'G({N}, {m})')
    logger.debug(f'F({N}, {m}) accepted after {attempts} attempts')
    return Forest.from_graph(graph)


def rejection_embedding(N: int, p: float, rng: np.random.Generator,
                        budget: Optional[int] = None) -> Tuple[Forest, Graph, int]:
    """F(N, p) as the first acyclic G(N, p), returned with that ambient graph and the number of attempts.

    The forest is the accepted graph itself, so its edges lie inside the ambient graph.
    """
    if not 0 < p < 1:
        raise DomainError(f'p must lie in (0, 1), got {p}')
    graph, attempts = _rejection(lambda: sample_gnp(N, p, rng), f'G({N}, {p:g})', budget)
    return Forest.from_graph(graph), graph, attempts


def sample_forest_np(table: Optional[LogCountTable], N: int, p: float, rng: np.random.Generator,
                     strategy: str = AUTO) -> Forest:
    if not 0 < p < 1:
        raise DomainError(f'p must lie in (0, 1), got {p}')
    if _resolve(table, N, strategy) == EXACT:
        m = int(rng.choice(N, p=edge_count_law(table, N, p)))
        return _sample_forest_exact(table, N, m, rng)
    forest, _, attempts = rejection_embedding(N, p, rng)
    logger.debug(f'F({N}, {p:g}) accepted after {attempts} attempts')
    return forest


def sample_edge_count(table: Optional[LogCountTable], N: int, p: float, rng: np.random.Generator) -> int:
    """Edge count of F(N, p), from the exact law when the table covers N"""
    if table is not None and table.covers(N):
        return int(rng.choice(N, p=edge_count_law(table, N, p)))
    return sample_forest_np(None, N, p, rng, REJECTION).n_edges


def sequential_cycle_bound(S2: float, k: int, N: int) -> float:
    """Bound on P(k edges drawn uniformly from [N]x[N] close a cycle in a forest with square-size sum S2)"""
    x = 2 * k * S2 / N ** 2
    if x >= 1:
        raise BoundUndefinedError(f'2kS^2/N^2 = {x:.3g} >= 1')
    return x / (1 - x)


@dataclass(frozen=True)
class SequentialAddition:
    added: np.ndarray
    failed_at: Optional[int]

    @property
    def failed(self) -> bool:
        return self.failed_at is not None


def add_uniform_edges(forest: Graph, k: int, rng: np.random.Generator) -> SequentialAddition:
    """Add k edges drawn independently from [N]x[N], one at a time.

    A self-edge, a repeated edge or a cycle is a failure; `failed_at` is the 1-based step of the first one.
    """
    N = forest.n_vertices
    added = rng.integers(0, N, size=(k, 2))
    union_find = UnionFind.from_edges(N, forest.edges)
    for step, (u, v) in enumerate(added.tolist(), 1):
        if not union_find.union(u, v):
            return SequentialAddition(added, step)
    return SequentialAddition(added, None)


@dataclass(frozen=True)
class CoupledTriple:
    lower: Forest
    middle: Forest
    upper: Forest
    monotone: bool
    in_window: bool
    cycle_bound: float = float('nan')

    def verify_chain(self) -> bool:
        """lower within middle within upper, edge by edge"""
        return self.middle.contains(self.lower) and self.upper.contains(self.middle)


def almost_monotone_triple(table: Optional[LogCountTable], N: int, m: int, rng: np.random.Generator,
                           exponent: Optional[float] = None) -> CoupledTriple:
    """Coupling of F(N, p-), F(N, m), F(N, p+) with N^2 p-/2 = floor(m - N^e), N^2 p+/2 = ceil(m + N^e).

    The lower forest grows into the upper one by uniform edge additions. A step that fails, and every later
    step, is replaced by an independent forest with the same edge count, so the marginals stay exact and the
    chain is monotone iff no step failed.
    """
    exponent = settings.MONOTONE_WINDOW_EXPONENT if exponent is None else exponent
    shift = N ** exponent
    m_low, m_high = math.floor(m - shift), math.ceil(m + shift)
    if m_low < 1 or m_high > N - 1:
        raise DomainError(f'm={m} is too close to the ends for N={N} and window {shift:.3g}')
    p_low, p_high = 2 * m_low / N ** 2, 2 * m_high / N ** 2

    lower = sample_forest_np(table, N, p_low, rng)
    M_low = lower.n_edges
    M_high = sample_edge_count(table, N, p_high, rng)
    if not m - 2 * shift < M_low < m < M_high < m + 2 * shift:
        logger.debug(f'Edge counts {M_low}, {M_high} outside the window around {m}')
        upper = sample_forest_nm(table, N, M_high, rng)
        return CoupledTriple(lower, sample_forest_nm(table, N, m, rng), upper, monotone=False, in_window=False)

    K = M_high - M_low
    try:
        bound = sequential_cycle_bound(lower.squared_sizes(), K, N)
    except BoundUndefinedError:
        bound = float('nan')
    addition = add_uniform_edges(lower, K, rng)
    to_middle = m - M_low
    if addition.failed and addition.failed_at <= to_middle:
        middle = sample_forest_nm(table, N, m, rng)
    else:
        middle = Forest(N, np.concatenate([lower.edges, addition.added[:to_middle]]))
    if addition.failed:
        upper = sample_forest_nm(table, N, M_high, rng)
    else:
        upper = Forest(N, np.concatenate([lower.edges, addition.added]))
    return CoupledTriple(lower, middle, upper, monotone=not addition.failed, in_window=True, cycle_bound=bound)
