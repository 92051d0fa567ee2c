"""Breadth-first exploration of graphs on 0..N-1 and the Markov chain of stack sizes of F(N, p).

The chain moves from Z_n = r >= 1 to r + l - 1 with weight Bin(N - n - r, p)(l) times the probability that r + l - 1
given labels are separated in F(N - n - 1, p). From Z_n = 0 it moves like from Z_n = 1, by +l instead of l - 1.
"""
import logging
import math
import threading
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom
from tqdm import tqdm

from critforest.scaling import settings
from critforest.scaling.combinatorics import (
    LogCountTable, ScalingParams, _acyclic_logs, _CHUNK, log_factorials,
)
from critforest.scaling.errors import DomainError, ValidationError
from critforest.scaling.graphs import Graph
from critforest.scaling.utils import child_rng

logger = logging.getLogger(__name__)

AlphaFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ExplorationTrace:
    n_vertices: int
    order: Optional[np.ndarray]
    stack_sizes: np.ndarray

    def validate(self):
        Z = self.stack_sizes
        if len(Z) != self.n_vertices + 1:
            raise ValidationError(f'{len(Z)} stack sizes for {self.n_vertices} vertices')
        if Z[0] != 0 or Z[-1] != 0:
            raise ValidationError('stack sizes must start and end at 0')
        if np.any(Z < 0) or np.any(np.diff(Z) < -1):
            raise ValidationError('stack sizes must be non-negative with increments >= -1')
        if self.order is not None and sorted(self.order.tolist()) != list(range(self.n_vertices)):
            raise ValidationError('order is not a permutation of the labels')


def explore(graph: Graph) -> ExplorationTrace:
    """Breadth-first order: a new root is the smallest unseen label, neighbours join the queue in increasing order"""
    N = graph.n_vertices
    indptr, indices = graph.neighbour_lists()
    indptr, indices = indptr.tolist(), indices.tolist()
    seen = [False] * N
    queue = deque()
    order, sizes = [], [0]
    next_root = 0
    for _ in range(N):
        if queue:
            v = queue.popleft()
        else:
            while seen[next_root]:
                next_root += 1
            v = next_root
            seen[v] = True
        order.append(v)
        for w in indices[indptr[v]:indptr[v + 1]]:
            if not seen[w]:
                seen[w] = True
                queue.append(w)
        sizes.append(len(queue))
    return ExplorationTrace(N, np.array(order, dtype=np.int64), np.array(sizes, dtype=np.int64))


def excursion_lengths(trace: ExplorationTrace) -> np.ndarray:
    """Gaps between consecutive zeros of the stack sizes, non-increasing"""
    trace.validate()
    zeros = np.flatnonzero(trace.stack_sizes == 0)
    return np.sort(np.diff(zeros))[::-1]


def prefix_excursion_lengths(prefix) -> np.ndarray:
    """Completed excursions of a stack-size prefix, non-increasing; one still open at the end is dropped"""
    zeros = np.flatnonzero(np.asarray(prefix) == 0)
    return np.sort(np.diff(zeros))[::-1]


def component_sizes_via_exploration(graph: Graph) -> np.ndarray:
    return excursion_lengths(explore(graph))


@dataclass(frozen=True, eq=False)
class IncrementDistribution:
    support: np.ndarray
    probs: np.ndarray
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        total = self.probs.sum()
        if not total > 0:
            raise ValidationError('increment distribution has no mass')
        probs = self.probs / total
        object.__setattr__(self, 'probs', probs)
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        object.__setattr__(self, 'cdf', cdf)

    def mean(self) -> float:
        return float(self.probs @ self.support)

    def second_moment(self) -> float:
        return float(self.probs @ self.support.astype(float) ** 2)

    def cdf_at(self, x) -> np.ndarray:
        index = np.searchsorted(self.support, x, side='right') - 1
        return np.where(index >= 0, self.cdf[np.clip(index, 0, None)], 0.0)

    def sample(self, uniforms) -> np.ndarray:
        return self.support[np.searchsorted(self.cdf, uniforms, side='right').clip(0, len(self.support) - 1)]


class TransitionKernel:
    """Rows of the exploration chain of F(N, p).

    Separation probabilities are computed per remaining size N' in blocks of r' and kept; rows themselves are kept
    in a bounded LRU. Insertions happen under a lock, reads of finished entries do not need it.
    """
    row_cache_size = 4096

    def __init__(self, table: Optional[LogCountTable], N: int, p: float, truncation: float = None):
        if N < 1:
            raise DomainError(f'N must be positive, got {N}')
        if not 0 < p < 1:
            raise DomainError(f'p must lie in (0, 1), got {p}')
        self.N = N
        self.p = p
        self.truncation = settings.KERNEL_TRUNCATION if truncation is None else truncation
        self.logger = logging.getLogger(self.__class__.__name__)

        self._lock = threading.Lock()
        self._acyclic = _acyclic_logs(table, N, p)
        self._lg = log_factorials(max(N, 1))
        self._separation: Dict[int, np.ndarray] = {}
        self._rows: 'OrderedDict[tuple, IncrementDistribution]' = OrderedDict()

    @property
    def Lambda(self) -> float:
        return ScalingParams(self.N, p=self.p).Lambda

    def _separation_block(self, N_prime: int, rs: np.ndarray) -> np.ndarray:
        """log P(labels 1..r' separated in F(N', p)) for every r' in rs (all >= 2)"""
        log_p, log_q = math.log(self.p), math.log1p(-self.p)
        lg, acyclic = self._lg, self._acyclic
        r = rs[:, None].astype(float)
        totals = np.full(len(rs), -np.inf)
        start = int(rs.min())
        with np.errstate(invalid='ignore', divide='ignore'):
            while start <= N_prime:
                ks = np.arange(start, min(start + _CHUNK, N_prime + 1))
                gap = ks[None, :] - rs[:, None]
                valid = gap >= 0
                gap = np.where(valid, gap, 0)
                terms = (ks * (2 * N_prime - ks - 1) / 2 * log_q
                         + lg[N_prime - rs][:, None] - lg[gap] - lg[N_prime - ks][None, :]
                         + gap * (log_p - log_q) + np.log(r) + (gap - 1) * np.log(ks)[None, :]
                         + acyclic[N_prime - ks][None, :])
                terms = np.where(valid, terms, -np.inf)
                totals = np.logaddexp(totals, logsumexp(terms, axis=1))
                if start > rs.max() and np.all(terms.max(axis=1) < totals - settings.LOG_SUM_CUTOFF):
                    break
                start += _CHUNK
        return totals - acyclic[N_prime]

    def log_separation(self, N_prime: int, r_max: int) -> np.ndarray:
        """log P(F(N', p) in A_{N', r'}) for r' = 0..r_max, with the first two entries 0"""
        r_max = min(r_max, N_prime)
        known = self._separation.get(N_prime)
        if known is not None and len(known) > r_max:
            return known
        with self._lock:
            known = self._separation.get(N_prime, np.zeros(min(2, N_prime + 1)))
            if len(known) <= r_max:
                extra = np.arange(len(known), r_max + 1)
                block = self._separation_block(N_prime, extra) if len(extra) else np.empty(0)
                known = np.concatenate([known, block])
                self._separation[N_prime] = known
        return known

    def forget(self, below_n: int):
        """Drop separation blocks no longer reachable from step below_n on"""
        with self._lock:
            for N_prime in [key for key in self._separation if key > self.N - below_n - 1]:
                del self._separation[N_prime]

    def _ell_range(self, trials: int) -> int:
        if trials == 0:
            return 0
        return int(min(trials, binom.isf(self.truncation, trials, self.p) + 1))

    def _build_row(self, n: int, r: int) -> IncrementDistribution:
        if r == 0:
            row = self._build_row(n, 1)
            return IncrementDistribution(row.support + 1, row.probs)
        trials = self.N - n - r
        ells = np.arange(self._ell_range(trials) + 1)
        N_prime = self.N - n - 1
        separation = self.log_separation(N_prime, r + int(ells[-1]) - 1)
        logs = binom.logpmf(ells, trials, self.p) + separation[r + ells - 1]
        return IncrementDistribution(ells - 1, np.exp(logs - logsumexp(logs)))

    def row(self, n: int, r: int) -> IncrementDistribution:
        if not 0 <= n < self.N:
            raise DomainError(f'need 0 <= n < N, got n={n} N={self.N}')
        if not 0 <= r <= self.N - n:
            raise DomainError(f'need 0 <= r <= N - n, got r={r}')
        key = (n, r)
        cached = self._rows.get(key)
        if cached is not None:
            return cached
        row = self._build_row(n, r)
        with self._lock:
            self._rows[key] = row
            if len(self._rows) > self.row_cache_size:
                self._rows.popitem(last=False)
        return row


@lru_cache(maxsize=8)
def kernel_for(table: Optional[LogCountTable], N: int, p: float) -> TransitionKernel:
    """Shared kernel per (table, N, p); each keeps its own bounded row cache"""
    return TransitionKernel(table, N, p)


def transition_kernel(table: Optional[LogCountTable], N: int, p: float, n: int, r: int) -> IncrementDistribution:
    return kernel_for(table, N, p).row(n, r)


def simulate_kernel_chain(table: Optional[LogCountTable], N: int, p: float, horizon: int,
                          rng: np.random.Generator, kernel: Optional[TransitionKernel] = None) -> np.ndarray:
    """Z_0..Z_horizon, one uniform per step"""
    if not 0 <= horizon <= N:
        raise DomainError(f'horizon must lie in [0, N], got {horizon}')
    kernel = kernel or kernel_for(table, N, p)
    uniforms = rng.random(horizon)
    Z = np.zeros(horizon + 1, dtype=np.int64)
    for n in range(horizon):
        Z[n + 1] = Z[n] + kernel.row(n, int(Z[n])).sample(uniforms[n])
    return Z


def simulate_kernel_ensemble(kernel: TransitionKernel, horizon: int, replicas: int, seed: int,
                             progress: bool = False) -> np.ndarray:
    """Stack-size prefixes of many independent chains, shape (replicas, horizon + 1).

    Replica i uses the uniforms of child_rng(seed, i) only, so its path does not depend on the other replicas.
    """
    if not 0 <= horizon <= kernel.N:
        raise DomainError(f'horizon must lie in [0, N], got {horizon}')
    uniforms = np.stack([child_rng(seed, index).random(horizon) for index in range(replicas)]) \
        if replicas else np.empty((0, horizon))
    Z = np.zeros((replicas, horizon + 1), dtype=np.int64)
    for n in tqdm(range(horizon), disable=not progress, desc='kernel chain'):
        states, inverse = np.unique(Z[:, n], return_inverse=True)
        for position, r in enumerate(states.tolist()):
            members = inverse == position
            Z[members, n + 1] = r + kernel.row(n, r).sample(uniforms[members, n])
        kernel.forget(n)
    return Z


@dataclass(frozen=True, eq=False)
class RescaledPath:
    """s -> N^{-1/3} Z_{floor(N^{2/3} s)} on [0, horizon / N^{2/3}], right-continuous"""
    values: np.ndarray
    N: int

    @property
    def horizon(self) -> float:
        return (len(self.values) - 1) / self.N ** (2 / 3)

    def __call__(self, s):
        index = np.floor(np.asarray(s, dtype=float) * self.N ** (2 / 3) + 1e-9).astype(np.int64)
        if np.any(index < 0) or np.any(index >= len(self.values)):
            raise DomainError(f'time outside [0, {self.horizon}]')
        return self.values[index] * self.N ** (-1 / 3)

    def sup(self) -> float:
        return float(self.values.max()) * self.N ** (-1 / 3)


def rescale_trace(prefix, N: int) -> RescaledPath:
    prefix = prefix.stack_sizes if isinstance(prefix, ExplorationTrace) else np.asarray(prefix)
    return RescaledPath(prefix, N)


@dataclass(frozen=True, eq=False)
class BinRecord:
    kind: str
    t_range: tuple
    b_range: tuple
    count: int
    mean: float
    se: float
    predicted: float

    @property
    def empty(self) -> bool:
        return self.count == 0

    def within(self, sigmas: float = 3.0, min_count: int = 1) -> Optional[bool]:
        """Whether the prediction lies within `sigmas` standard errors; None for bins below min_count"""
        if self.count < min_count or math.isnan(self.predicted):
            return None
        return abs(self.mean - self.predicted) <= sigmas * max(self.se, 1e-300)

    def to_dict(self) -> dict:
        return {'kind': self.kind, 't_range': list(self.t_range), 'b_range': list(self.b_range),
                'count': self.count, 'mean': self.mean, 'se': self.se, 'predicted': self.predicted}


def _summary(values: np.ndarray):
    if len(values) == 0:
        return 0, float('nan'), float('nan')
    se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else float('inf')
    return len(values), float(values.mean()), se


def empirical_increment_stats(prefixes: np.ndarray, N: int, p: float, time_bins: Sequence[float],
                              height_bins: Sequence[float], delta: float = 0.5,
                              alpha: Optional[AlphaFunction] = None) -> List[BinRecord]:
    """Binned drift, second moment, jump frequency and stickiness of an ensemble of stack-size prefixes.

    Drift is N^{1/3} times the mean increment from Z_n > 0, compared with the mean of lambda - t - alpha(b, lambda - t)
    over the same samples; the second moment is compared with 1 + d N^{-1/3} + d^2 N^{-2/3} for that predicted drift d.
    """
    prefixes = np.atleast_2d(np.asarray(prefixes))
    if prefixes.size == 0:
        raise DomainError('empty ensemble')
    if alpha is None:
        from critforest.scaling.drift import default_alpha_table
        alpha = default_alpha_table()
    Lambda = ScalingParams(N, p=p).Lambda
    scale_t, scale_z = N ** (2 / 3), N ** (1 / 3)

    Z = prefixes[:, :-1]
    steps = np.diff(prefixes, axis=1)
    t = np.broadcast_to(np.arange(Z.shape[1]) / scale_t, Z.shape)
    b = Z / scale_z
    time_bins, height_bins = np.asarray(time_bins, dtype=float), np.asarray(height_bins, dtype=float)

    records = []
    for t_lo, t_hi in zip(time_bins[:-1], time_bins[1:]):
        in_time = (t >= t_lo) & (t < t_hi)
        for b_lo, b_hi in zip(height_bins[:-1], height_bins[1:]):
            mask = in_time & (Z > 0) & (b >= b_lo) & (b < b_hi)
            increments = steps[mask].astype(float)
            if len(increments):
                drift = Lambda - t[mask] - alpha(b[mask], Lambda - t[mask])
                predicted = float(drift.mean())
                predicted_square = float(np.mean(1 + drift / scale_z + drift ** 2 / scale_z ** 2))
            else:
                predicted = predicted_square = float('nan')
            records.append(BinRecord('drift', (t_lo, t_hi), (b_lo, b_hi), *_summary(increments * scale_z), predicted))
            records.append(BinRecord('second_moment', (t_lo, t_hi), (b_lo, b_hi), *_summary(increments ** 2),
                                     predicted_square))

        jumps = (np.abs(steps[in_time]) > delta * scale_z).astype(float)
        records.append(BinRecord('jump', (t_lo, t_hi), (0.0, float('inf')), *_summary(jumps), 0.0))
        after_zero = prefixes[:, 1:][in_time & (Z == 0)].astype(float) ** 2
        records.append(BinRecord('stickiness', (t_lo, t_hi), (0.0, 0.0), *_summary(after_zero), float('nan')))
    empty = sum(record.empty for record in records)
    if empty:
        logger.info(f'{empty} of {len(records)} bins are empty')
    return records
