"""Replica tasks and the experiments built from them.

Every `_..._task(index, ...)` function is module level so that EnsembleRunner can ship it to worker processes,
and draws its randomness from child_rng(seed, index) alone.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from critforest.scaling.analysis import SizeSample, ks_distance, size_of_uniform_vertex_component
from critforest.scaling.combinatorics import LogCountTable
from critforest.scaling.diffusion import brownian_excursion_maxima
from critforest.scaling.enumeration import all_forests, edge_slots
from critforest.scaling.ensemble import EnsembleRunner
from critforest.scaling.errors import BoundUndefinedError, DomainError
from critforest.scaling.exploration import explore
from critforest.scaling.samplers import (
    AUTO, add_uniform_edges, almost_monotone_triple, rejection_embedding, sample_forest_nm, sample_forest_np,
    sample_gnp, sample_uniform_tree, sequential_cycle_bound,
)
from critforest.scaling.utils import child_rng

logger = logging.getLogger(__name__)


def _forest_sizes_task(index: int, N: int, m: Optional[int], p: Optional[float], seed: int,
                       table: Optional[LogCountTable] = None, strategy: str = AUTO) -> np.ndarray:
    rng = child_rng(seed, index)
    if m is not None:
        forest = sample_forest_nm(table, N, m, rng, strategy)
    else:
        forest = sample_forest_np(table, N, p, rng, strategy)
    return forest.component_sizes()


def _embedding_task(index: int, N: int, p: float, seed: int) -> Tuple[np.ndarray, np.ndarray, bool]:
    forest, graph, _ = rejection_embedding(N, p, child_rng(seed, index))
    return forest.component_sizes(), graph.component_sizes(), graph.contains(forest)


def _uniform_tree_task(index: int, K: int, seed: int) -> float:
    tree = sample_uniform_tree(K, child_rng(seed, index))
    return float(explore(tree).stack_sizes.max()) / math.sqrt(K)


def _triple_task(index: int, N: int, m: int, seed: int, exponent: Optional[float]) -> Tuple[bool, bool, bool, float]:
    triple = almost_monotone_triple(None, N, m, child_rng(seed, index), exponent)
    return triple.monotone, triple.in_window, triple.verify_chain(), triple.cycle_bound


def _sequential_task(index: int, N: int, m: int, k: int, seed: int) -> Tuple[bool, float]:
    rng = child_rng(seed, index)
    forest = sample_forest_nm(None, N, m, rng)
    try:
        bound = sequential_cycle_bound(forest.squared_sizes(), k, N)
    except BoundUndefinedError:
        bound = float('nan')
    return add_uniform_edges(forest, k, rng).failed, bound


def _uniform_vertex_task(index: int, N: int, p: float, seed: int) -> int:
    rng = child_rng(seed, index)
    return size_of_uniform_vertex_component(sample_gnp(N, p, rng), rng)


def forest_size_sample(N: int, replicas: int, seed: int, m: Optional[int] = None, p: Optional[float] = None,
                       runner: Optional[EnsembleRunner] = None, table: Optional[LogCountTable] = None) -> SizeSample:
    """Component sizes of F(N, m) or F(N, p), rescaled by N^{-2/3}"""
    if (m is None) == (p is None):
        raise DomainError('give exactly one of m and p')
    runner = runner or EnsembleRunner()
    sizes = runner.map(_forest_sizes_task, replicas, N, m, p, seed, table, desc='forests')
    return SizeSample([replica * N ** (-2 / 3) for replica in sizes], validate=False)


@dataclass
class UniformTreeCheck:
    K: int
    tree_maxima: np.ndarray
    excursion_maxima: np.ndarray
    distance: float = field(init=False)

    def __post_init__(self):
        self.distance = ks_distance(self.tree_maxima, self.excursion_maxima)


def uniform_tree_check(K: int, count: int, seed: int, steps: int = 10000,
                       runner: Optional[EnsembleRunner] = None) -> UniformTreeCheck:
    """Exploration maximum of uniform trees on K labels over sqrt(K) against the maximum of normalized excursions"""
    if K < 2 or count < 1:
        raise DomainError(f'need K >= 2 and count >= 1, got K={K} count={count}')
    runner = runner or EnsembleRunner()
    tree_maxima = np.array(runner.map(_uniform_tree_task, count, K, seed, desc='uniform trees'))
    excursion_maxima = brownian_excursion_maxima(count, steps, child_rng(seed, count))
    check = UniformTreeCheck(K, tree_maxima, excursion_maxima)
    logger.info(f'Uniform tree check at K={K}: KS distance {check.distance:.4f}')
    return check


@dataclass(frozen=True)
class MonotoneRate:
    trials: int
    monotone: int
    in_window: int
    chains_verified: bool
    mean_bound: float

    @property
    def rate(self) -> float:
        return self.monotone / self.trials


def monotone_rate(N: int, m: int, trials: int, seed: int, exponent: Optional[float] = None,
                  runner: Optional[EnsembleRunner] = None) -> MonotoneRate:
    runner = runner or EnsembleRunner()
    results = runner.map(_triple_task, trials, N, m, seed, exponent, desc='coupled triples')
    bounds = np.array([bound for _, _, _, bound in results])
    return MonotoneRate(trials, sum(result[0] for result in results), sum(result[1] for result in results),
                        all(verified for monotone, _, verified, _ in results if monotone),
                        float(np.nanmean(bounds)) if np.isfinite(bounds).any() else float('nan'))


@dataclass(frozen=True)
class SequentialCheck:
    trials: int
    failures: int
    mean_bound: float

    @property
    def frequency(self) -> float:
        return self.failures / self.trials

    @property
    def standard_error(self) -> float:
        q = self.frequency
        return math.sqrt(max(q * (1 - q), 1 / self.trials) / self.trials)

    @property
    def holds(self) -> bool:
        return self.frequency <= self.mean_bound + 3 * self.standard_error


def sequential_check(N: int, m: int, k: int, trials: int, seed: int,
                     runner: Optional[EnsembleRunner] = None) -> SequentialCheck:
    """Frequency with which k uniform edges close a cycle in F(N, m), against the mean of the per-forest bound"""
    runner = runner or EnsembleRunner()
    results = runner.map(_sequential_task, trials, N, m, k, seed, desc='edge additions')
    return SequentialCheck(trials, sum(failed for failed, _ in results),
                           float(np.mean([bound for _, bound in results])))


def uniform_vertex_component_mean(N: int, p: float, replicas: int, seed: int,
                                  runner: Optional[EnsembleRunner] = None) -> Tuple[float, float]:
    """Mean and standard error of the size of the component of a uniform vertex in G(N, p)"""
    runner = runner or EnsembleRunner()
    sizes = np.array(runner.map(_uniform_vertex_task, replicas, N, p, seed, desc='G(N,p) components'), dtype=float)
    return float(sizes.mean()), float(sizes.std(ddof=1) / math.sqrt(len(sizes))) if len(sizes) > 1 else float('nan')


@dataclass(frozen=True)
class DominationFinding:
    event: str
    lower: float
    upper: float

    @property
    def gap(self) -> float:
        return self.lower - self.upper

    def to_dict(self) -> dict:
        return {'event': self.event, 'p_lower': self.lower, 'p_upper': self.upper, 'gap': self.gap}


@dataclass
class DominationReport:
    N: int
    p: float
    q: float
    events: int = 0
    findings: List[DominationFinding] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {'N': self.N, 'p': self.p, 'q': self.q, 'events': self.events,
                'findings': [finding.to_dict() for finding in self.findings]}


def domination_search(N: int, p: float, q: float, tolerance: float = 1e-12) -> DominationReport:
    """Increasing events E with P(F(N, p) in E) > P(F(N, q) in E) although p < q.

    Checks the principal up-sets {F containing H} for every forest H and the thresholds {at least j edges}.
    Whatever turns up is reported; F(N, q) dominating F(N, p) is neither assumed nor asserted.
    """
    if not 0 < p < q < 1:
        raise DomainError(f'need 0 < p < q < 1, got p={p} q={q}')
    slots = {slot: bit for bit, slot in enumerate(edge_slots(N))}
    forests = all_forests(N)
    masks = np.array([sum(1 << slots[edge] for edge in forest) for forest in forests], dtype=np.int64)
    sizes = np.array([len(forest) for forest in forests])

    def law(x):
        logs = sizes * (math.log(x) - math.log1p(-x))
        weights = np.exp(logs - logs.max())
        return weights / weights.sum()

    lower, upper = law(p), law(q)
    report = DominationReport(N, p, q)
    for forest, mask in zip(forests, masks.tolist()):
        if not forest:
            continue
        inside = (masks & mask) == mask
        report.events += 1
        a, b = float(lower[inside].sum()), float(upper[inside].sum())
        if a > b + tolerance:
            report.findings.append(DominationFinding(f'contains {list(map(list, forest))}', a, b))
    for j in range(1, N):
        inside = sizes >= j
        report.events += 1
        a, b = float(lower[inside].sum()), float(upper[inside].sum())
        if a > b + tolerance:
            report.findings.append(DominationFinding(f'at least {j} edges', a, b))
    logger.info(f'Domination search at N={N}, p={p:g}, q={q:g}: {len(report.findings)} of {report.events} '
                f'increasing events favour the smaller p')
    return report
