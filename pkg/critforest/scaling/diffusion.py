"""Reflected diffusions Z (drift lambda - t - alpha(z, lambda - t)) and B (drift lambda - t) on a uniform grid.

Reflection is the discrete Skorokhod step z -> max(0, z + drift dt + sqrt(dt) xi); the amount cut off at each step
is the increment of the local time at zero.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from critforest.scaling import settings
from critforest.scaling.errors import DomainError
from critforest.scaling.utils import child_rng

logger = logging.getLogger(__name__)

KINDS = ('Z', 'B')
AlphaFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _default_alpha() -> AlphaFunction:
    from critforest.scaling.drift import default_alpha_table
    return default_alpha_table()


def drift_field(t, z, lam: float, alpha: Optional[AlphaFunction] = None) -> np.ndarray:
    """lambda - t - alpha(z, lambda - t), with alpha(0, .) = 0"""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError('z must be non-negative')
    t = np.asarray(t, dtype=float)
    alpha = alpha or _default_alpha()
    correction = np.where(z > 0, alpha(z, lam - t), 0.0)
    return lam - t - correction


@dataclass(frozen=True, eq=False)
class DiffusionPath:
    lam: float
    dt: float
    values: np.ndarray
    pushes: np.ndarray
    kind: str = 'Z'

    @property
    def horizon(self) -> float:
        return (len(self.values) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    def local_time(self) -> np.ndarray:
        """Cumulative amount removed by the reflection, on the same grid as the values"""
        return np.concatenate([[0.0], np.cumsum(self.pushes)])

    def time_at_zero(self) -> float:
        return float(np.mean(self.values[1:] == 0))


@dataclass(frozen=True, eq=False)
class ExcursionSet:
    intervals: np.ndarray
    lengths: np.ndarray
    open_final: bool = False

    def __len__(self):
        return len(self.lengths)

    def total(self) -> float:
        return float(self.lengths.sum())


def _check_grid(T: float, dt: float):
    if not dt > 0:
        raise DomainError(f'dt must be positive, got {dt}')
    if not T > 0:
        raise DomainError(f'T must be positive, got {T}')


def _steps(T: float, dt: float) -> int:
    return int(round(T / dt))


def _euler(lam: float, dt: float, normals: np.ndarray, kind: str, alpha: Optional[AlphaFunction],
           start: Optional[np.ndarray] = None, first_step: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Paths of shape (replicas, steps + 1) and pushes of shape (replicas, steps)"""
    if kind not in KINDS:
        raise DomainError(f'kind must be one of {KINDS}')
    if kind == 'Z':
        alpha = alpha or _default_alpha()
    replicas, steps = normals.shape
    values = np.zeros((replicas, steps + 1))
    if start is not None:
        values[:, 0] = start
    pushes = np.zeros((replicas, steps))
    root_dt = math.sqrt(dt)
    for i in range(steps):
        t = (first_step + i) * dt
        z = values[:, i]
        drift = lam - t
        if kind == 'Z':
            drift = drift - np.where(z > 0, alpha(z, np.full_like(z, lam - t)), 0.0)
        proposal = z + drift * dt + root_dt * normals[:, i]
        values[:, i + 1] = np.maximum(proposal, 0.0)
        pushes[:, i] = np.maximum(-proposal, 0.0)
    return values, pushes


def _simulate(kind: str, lam: float, T: float, dt: float, rng: np.random.Generator,
              alpha: Optional[AlphaFunction]) -> DiffusionPath:
    _check_grid(T, dt)
    normals = rng.standard_normal((1, _steps(T, dt)))
    values, pushes = _euler(lam, dt, normals, kind, alpha)
    return DiffusionPath(lam, dt, values[0], pushes[0], kind)


def simulate_Z(lam: float, T: float, dt: float, rng: np.random.Generator,
               alpha: Optional[AlphaFunction] = None) -> DiffusionPath:
    return _simulate('Z', lam, T, dt, rng, alpha)


def simulate_B(lam: float, T: float, dt: float, rng: np.random.Generator) -> DiffusionPath:
    return _simulate('B', lam, T, dt, rng, None)


def coupled_ZB(lam: float, T: float, dt: float, rng: np.random.Generator,
               alpha: Optional[AlphaFunction] = None) -> Tuple[DiffusionPath, DiffusionPath]:
    """Z and B driven by the same Gaussian increments, so that Z <= B on the whole grid"""
    _check_grid(T, dt)
    normals = rng.standard_normal((1, _steps(T, dt)))
    z_values, z_pushes = _euler(lam, dt, normals, 'Z', alpha)
    b_values, b_pushes = _euler(lam, dt, normals, 'B', None)
    return (DiffusionPath(lam, dt, z_values[0], z_pushes[0], 'Z'),
            DiffusionPath(lam, dt, b_values[0], b_pushes[0], 'B'))


def _positive_runs(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Grid indices (zero before, zero after) of every maximal run of positive values"""
    positive = np.concatenate([[False], values > 0, [False]]).astype(np.int8)
    edges = np.diff(positive)
    starts = np.flatnonzero(edges == 1) - 1
    ends = np.flatnonzero(edges == -1)
    return starts, ends


def diffusion_excursions(path: DiffusionPath, min_length: Optional[float] = None,
                         include_open: bool = False) -> ExcursionSet:
    """Maximal intervals on which the path is positive, longest first.

    An excursion runs from the last grid zero before it to the first grid zero after it. One still open at the
    horizon is cut there and kept only with `include_open`.
    """
    min_length = 2 * path.dt if min_length is None else min_length
    if min_length < path.dt:
        raise DomainError('min_length must be at least dt')
    starts, ends = _positive_runs(path.values)
    last = len(path.values) - 1
    open_final = bool(len(ends) and ends[-1] > last)
    ends = np.minimum(ends, last)
    if open_final and not include_open:
        starts, ends = starts[:-1], ends[:-1]
    intervals = np.stack([starts, ends], axis=1) * path.dt if len(starts) else np.empty((0, 2))
    lengths = intervals[:, 1] - intervals[:, 0]
    keep = lengths >= min_length - 1e-12 * path.dt
    intervals, lengths = intervals[keep], lengths[keep]
    order = np.argsort(-lengths, kind='stable')
    return ExcursionSet(intervals[order], lengths[order], open_final=open_final and include_open)


@dataclass
class EnsembleResult:
    """Completed excursions of every replica, in order of completion, with their heights"""
    lam: float
    dt: float
    horizon: float
    kind: str
    lengths: List[np.ndarray] = field(default_factory=list)
    heights: List[np.ndarray] = field(default_factory=list)
    open_lengths: np.ndarray = None
    time_at_zero: np.ndarray = None
    paths: Optional[np.ndarray] = None

    def sorted_lengths(self, index: int, include_open: bool = False) -> np.ndarray:
        lengths = self.lengths[index]
        if include_open and self.open_lengths[index] > 0:
            lengths = np.append(lengths, self.open_lengths[index])
        return np.sort(lengths)[::-1]

    def ranked(self, rank: int, include_open: bool = False) -> np.ndarray:
        """rank-th longest excursion of every replica (1-based), 0 where there are fewer"""
        values = []
        for index in range(len(self.lengths)):
            lengths = self.sorted_lengths(index, include_open)
            values.append(lengths[rank - 1] if len(lengths) >= rank else 0.0)
        return np.array(values)


def simulate_ensemble(lam: float, T: float, dt: float, replicas: int, seed: int, kind: str = 'Z',
                      alpha: Optional[AlphaFunction] = None, min_length: Optional[float] = None,
                      store_paths: bool = False, chunk: int = 1000, progress: bool = False,
                      substeps: int = 1) -> EnsembleResult:
    """Many independent paths advanced together, replica i driven by child_rng(seed, i) alone.

    Excursions are recorded as they complete, so paths need not be kept. With substeps > 1 every increment is the
    normalized sum of that many draws; a run at dt / substeps with chunk * substeps then sees the same noise.
    """
    _check_grid(T, dt)
    min_length = 2 * dt if min_length is None else min_length
    steps = _steps(T, dt)
    streams = [child_rng(seed, index) for index in range(replicas)]
    records = [[] for _ in range(replicas)]
    last_zero = np.zeros(replicas, dtype=np.int64)
    height = np.zeros(replicas)
    zero_count = np.zeros(replicas, dtype=np.int64)
    state = np.zeros(replicas)
    stored = [] if store_paths else None

    for first in tqdm(range(0, steps, chunk), disable=not progress, desc=f'{kind} ensemble'):
        size = min(chunk, steps - first)
        normals = np.stack([stream.standard_normal(size * substeps).reshape(size, substeps).sum(axis=1)
                            for stream in streams]) / math.sqrt(substeps)
        values, _ = _euler(lam, dt, normals, kind, alpha, start=state, first_step=first)
        if store_paths:
            stored.append(values[:, :-1] if first + size < steps else values)
        for i in range(1, size + 1):
            column = values[:, i]
            height = np.maximum(height, column)
            at_zero = column == 0
            zero_count += at_zero
            finished = np.flatnonzero(at_zero & (values[:, i - 1] > 0))
            step = first + i
            for replica in finished.tolist():
                length = (step - last_zero[replica]) * dt
                if length >= min_length - 1e-12 * dt:
                    records[replica].append((length, height[replica]))
            last_zero[at_zero] = step
            height[at_zero] = 0.0
        state = values[:, -1]

    result = EnsembleResult(lam, dt, steps * dt, kind)
    for replica in range(replicas):
        pairs = np.array(records[replica]).reshape(-1, 2)
        result.lengths.append(pairs[:, 0])
        result.heights.append(pairs[:, 1])
    result.open_lengths = np.where(state > 0, (steps - last_zero) * dt, 0.0)
    result.time_at_zero = zero_count / max(steps, 1)
    if store_paths:
        result.paths = np.concatenate(stored, axis=1)
    return result


def sample_brownian_excursion(steps: int, rng: np.random.Generator) -> np.ndarray:
    """Normalized Brownian excursion on [0, 1] from a random-walk bridge rotated at its minimum"""
    increments = rng.standard_normal(steps) / math.sqrt(steps)
    walk = np.concatenate([[0.0], np.cumsum(increments)])
    bridge = walk - np.linspace(0.0, 1.0, steps + 1) * walk[-1]
    low = int(np.argmin(bridge[:-1]))
    rotated = np.concatenate([bridge[low:-1], bridge[:low + 1]]) - bridge[low]
    return np.maximum(rotated, 0.0)


def brownian_excursion_maxima(count: int, steps: int, rng: np.random.Generator) -> np.ndarray:
    bridges = np.cumsum(rng.standard_normal((count, steps)) / math.sqrt(steps), axis=1)
    bridges = np.concatenate([np.zeros((count, 1)), bridges], axis=1)
    bridges -= np.linspace(0.0, 1.0, steps + 1)[None, :] * bridges[:, -1:]
    return bridges.max(axis=1) - bridges.min(axis=1)


def excursion_max_cdf(x, terms: int = 200) -> np.ndarray:
    """P(max of the normalized Brownian excursion <= x) = 1 + 2 sum_k (1 - 4k^2x^2) exp(-2k^2x^2)"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = np.arange(1, terms + 1)[:, None]
    with np.errstate(over='ignore'):
        series = 1 + 2 * np.sum((1 - 4 * k ** 2 * x ** 2) * np.exp(-2 * k ** 2 * x ** 2), axis=0)
    return np.clip(np.where(x > 0.1, series, 0.0), 0.0, 1.0)


def conditioned_excursion_maxima(result: EnsembleResult, low: float = 0.9, high: float = 1.1) -> np.ndarray:
    """Heights of the completed excursions with length in [low, high], rescaled to unit length"""
    maxima = []
    for lengths, heights in zip(result.lengths, result.heights):
        keep = (lengths >= low) & (lengths <= high)
        maxima.append(heights[keep] / np.sqrt(lengths[keep]))
    return np.concatenate(maxima) if maxima else np.empty(0)
