"""Comparators for component-size and excursion-length samples."""
import logging
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from critforest.scaling.errors import BoundUndefinedError, DomainError, ValidationError
from critforest.scaling.graphs import Graph

logger = logging.getLogger(__name__)

MIN_EXPECTED_COUNT = 5


def _as_sample(values) -> np.ndarray:
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise DomainError('sample is empty')
    return values


class SizeSample:
    """Replicas of non-increasing non-negative sequences, read as padded with zeros"""

    def __init__(self, replicas: Iterable[Sequence[float]], validate: bool = True):
        self.replicas = [np.asarray(replica, dtype=float) for replica in replicas]
        if validate:
            for replica in self.replicas:
                if np.any(replica < 0) or np.any(np.diff(replica) > 0):
                    raise ValidationError('every replica must be non-negative and non-increasing')

    @classmethod
    def from_unsorted(cls, replicas: Iterable[Sequence[float]], scale: float = 1.0) -> 'SizeSample':
        return cls([np.sort(np.asarray(replica, dtype=float))[::-1] * scale for replica in replicas], validate=False)

    def __len__(self):
        return len(self.replicas)

    def padded(self, k: int) -> np.ndarray:
        """First k entries of every replica, shape (replicas, k)"""
        matrix = np.zeros((len(self.replicas), k))
        for row, replica in zip(matrix, self.replicas):
            head = replica[:k]
            row[:len(head)] = head
        return matrix

    def rank(self, rank: int) -> np.ndarray:
        return self.padded(rank)[:, rank - 1]


def ks_distance(a, b) -> float:
    """Sup distance between the two empirical distribution functions"""
    return float(stats.ks_2samp(_as_sample(a), _as_sample(b)).statistic)


def ks_test(a, b) -> Tuple[float, float]:
    result = stats.ks_2samp(_as_sample(a), _as_sample(b))
    return float(result.statistic), float(result.pvalue)


def ks_permutation_threshold(a, b, level: float = 0.99, permutations: int = 1000,
                             rng: Optional[np.random.Generator] = None) -> float:
    """level-quantile of the KS distance when the pooled sample is split at random"""
    a, b = _as_sample(a), _as_sample(b)
    rng = rng or np.random.default_rng()
    pooled = np.concatenate([a, b])
    distances = np.empty(permutations)
    for i in range(permutations):
        shuffled = rng.permutation(pooled)
        distances[i] = stats.ks_2samp(shuffled[:len(a)], shuffled[len(a):]).statistic
    return float(np.quantile(distances, level))


def _prefix_sums(values, length: int) -> np.ndarray:
    padded = np.zeros(length)
    values = np.sort(np.asarray(values, dtype=float))[::-1]
    padded[:len(values)] = values
    return np.cumsum(padded)


def weak_majorises(a, b, tolerance: float = 1e-12) -> bool:
    """Every prefix sum of a, sorted non-increasingly and padded with zeros, is at least that of b"""
    length = max(len(a), len(b))
    if length == 0:
        return True
    return bool(np.all(_prefix_sums(a, length) >= _prefix_sums(b, length) - tolerance))


def l2_tail(sizes, k: int) -> float:
    """Sum of squares beyond the k largest entries"""
    if k < 0:
        raise DomainError(f'k must be non-negative, got {k}')
    values = np.sort(np.asarray(sizes, dtype=float))[::-1]
    return float(np.sum(values[k:] ** 2))


@dataclass(frozen=True)
class TailCheck:
    tail: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.tail <= self.bound * (1 + 1e-12)


def tail_concatenation_check(blocks: Sequence[Sequence[float]], k: int, eta: float) -> TailCheck:
    """Squares of the pooled terms beyond rank k/eta against eta * (k largest block sums)^2 + the rest of the sums"""
    if k < 1 or not eta > 0:
        raise DomainError('need k >= 1 and eta > 0')
    sums = np.sort([float(np.sum(block)) for block in blocks])[::-1]
    pooled = np.sort(np.concatenate([np.asarray(block, dtype=float) for block in blocks]))[::-1]
    cut = int(np.floor(k / eta))
    tail = float(np.sum(pooled[cut:] ** 2))
    bound = eta * float(np.sum(sums[:k] ** 2)) + float(np.sum(sums[k:] ** 2))
    return TailCheck(tail, bound)


@dataclass(frozen=True)
class SpectrumRow:
    rank: int
    mean: float
    se: float
    median: float
    deciles: Tuple[float, ...]

    def to_dict(self) -> dict:
        return {'rank': self.rank, 'mean': self.mean, 'se': self.se, 'median': self.median,
                'deciles': list(self.deciles)}


def component_spectrum(sample: SizeSample, k: int) -> List[SpectrumRow]:
    if k < 1:
        raise DomainError(f'k must be positive, got {k}')
    if not len(sample):
        raise DomainError('sample is empty')
    matrix = sample.padded(k)
    rows = []
    for rank in range(1, k + 1):
        column = matrix[:, rank - 1]
        se = float(column.std(ddof=1) / np.sqrt(len(column))) if len(column) > 1 else float('nan')
        deciles = tuple(float(value) for value in np.quantile(column, np.linspace(0.1, 0.9, 9)))
        rows.append(SpectrumRow(rank, float(column.mean()), se, float(np.median(column)), deciles))
    return rows


def chi_square_uniform(observations: Iterable[Hashable], categories: Sequence[Hashable]) -> Tuple[float, float]:
    """Chi-square statistic and p-value of observed category frequencies against the uniform law"""
    counts = _count(observations, categories)
    result = stats.chisquare(counts)
    return float(result.statistic), float(result.pvalue)


def chi_square_two_sample(left: Iterable[Hashable], right: Iterable[Hashable]) -> Tuple[float, float]:
    """Homogeneity test of two samples over the union of their categories.

    Categories are taken from the rarest up and pooled until every cell expects at least MIN_EXPECTED_COUNT
    observations; a leftover pool too small on its own joins the last full one.
    """
    left, right = list(left), list(right)
    categories = sorted(set(left) | set(right), key=repr)
    table = _pool_sparse(np.stack([_count(left, categories), _count(right, categories)]))
    if table.shape[1] < 2:
        return 0.0, 1.0
    statistic, pvalue, _, _ = stats.chi2_contingency(table)
    return float(statistic), float(pvalue)


def _pool_sparse(table: np.ndarray) -> np.ndarray:
    totals = table.sum(axis=0)
    share = table.sum(axis=1).min() / totals.sum()
    columns, pool = [], np.zeros(table.shape[0], dtype=table.dtype)
    for column in table[:, np.argsort(totals, kind='stable')].T:
        pool = pool + column
        if pool.sum() * share >= MIN_EXPECTED_COUNT:
            columns.append(pool)
            pool = np.zeros_like(pool)
    if pool.any():
        if columns:
            columns[-1] = columns[-1] + pool
        else:
            columns.append(pool)
    return np.stack(columns, axis=1)


def _count(observations: Iterable[Hashable], categories: Sequence[Hashable]) -> np.ndarray:
    index: Dict[Hashable, int] = {category: position for position, category in enumerate(categories)}
    counts = np.zeros(len(categories), dtype=np.int64)
    for observation in observations:
        if observation not in index:
            raise ValidationError(f'unexpected category {observation!r}')
        counts[index[observation]] += 1
    return counts


def galton_watson_mean_bound(N: int, p: float) -> float:
    """Mean total progeny 1 / (1 - Np) of a Poisson(Np) Galton-Watson tree"""
    if N * p >= 1:
        raise BoundUndefinedError(f'Np = {N * p:g} is not subcritical')
    return 1 / (1 - N * p)


def size_of_uniform_vertex_component(graph: Graph, rng: np.random.Generator) -> int:
    _, labels = graph.component_labels()
    vertex = int(rng.integers(graph.n_vertices))
    return int(np.count_nonzero(labels == labels[vertex]))


def mean_component_size_of_uniform_vertex(graphs: Iterable[Graph], rng: np.random.Generator) -> Tuple[float, float]:
    """Mean and standard error over graphs of the size of the component holding a uniform vertex"""
    sizes = np.array([size_of_uniform_vertex_component(graph, rng) for graph in graphs], dtype=float)
    if sizes.size == 0:
        raise DomainError('no graphs given')
    se = float(sizes.std(ddof=1) / np.sqrt(len(sizes))) if len(sizes) > 1 else float('nan')
    return float(sizes.mean()), se
