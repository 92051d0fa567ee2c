"""Drift correction alpha(b, lambda) = J_1 / J_3 and the integrals

    J_k(b, lambda) = int_0^inf a^{-k/2} I(lambda - a) exp(-b^2 / 2a) da,    I(x) = 2^{2/3} g(2^{2/3} x).

The integral is taken with the trapezoid rule in log a on a grid anchored at the split point. In that variable the
integrand decays doubly exponentially at both ends, so halving the step converges geometrically. All values are
carried as logs with the factor exp(lambda^3 / 6) split off.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.special import logsumexp

from critforest.scaling import settings
from critforest.scaling.errors import AccuracyError, DomainError
from critforest.scaling.stable_density import FOREST_SCALE, QuadratureConfig, default_grid, eval_g, log_eval_g_array

logger = logging.getLogger(__name__)

G_SOURCES = ('direct', 'grid')
_CUBIC_CUTOFF = -60.0
# part of the cached table name, raised whenever the J_k integrand changes
TABLE_REVISION = 2


@dataclass(frozen=True)
class DriftEvalConfig:
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    split_point: Optional[float] = None
    log_step: float = field(default_factory=lambda: settings.DRIFT_LOG_STEP)
    max_halvings: int = field(default_factory=lambda: settings.DRIFT_MAX_HALVINGS)
    g_source: str = 'direct'

    def __post_init__(self):
        if self.split_point is not None and self.split_point <= 0:
            raise DomainError('split_point must be positive')
        if self.g_source not in G_SOURCES:
            raise DomainError(f'g_source must be one of {G_SOURCES}')
        if self.log_step <= 0:
            raise DomainError('log_step must be positive')

    @classmethod
    def hot(cls) -> 'DriftEvalConfig':
        return cls(quad=QuadratureConfig.hot(), g_source='grid')

    def split(self, b: float) -> float:
        return self.split_point if self.split_point is not None else max(b * b, 0.5)

    def log_g(self, xs: np.ndarray) -> np.ndarray:
        if self.g_source == 'grid':
            return default_grid().log_g(xs)
        return log_eval_g_array(xs, self.quad)


def _log_h(a: np.ndarray, lam: float, cfg: DriftEvalConfig) -> np.ndarray:
    """log[I(lambda - a) exp(-lambda^3 / 6)]"""
    return math.log(FOREST_SCALE) + cfg.log_g(FOREST_SCALE * (lam - a)) - lam ** 3 / 6


def _upper_limit(lam: float, start: float) -> float:
    """a beyond which I(lambda - a) ~ exp((lambda - a)^3 / 6) is below e^-60 relative to its peak"""
    a = max(start, lam, 0.0) + 1.0
    while ((lam - a) ** 3 - min(lam, 0.0) ** 3) / 6 > _CUBIC_CUTOFF:
        a += 1.0
    return a


def _check_b(b: float):
    if not b > 0:
        raise DomainError(f'b must be positive, got {b}')


def _log_terms(k: int, b: float, v: np.ndarray, log_h: np.ndarray) -> np.ndarray:
    """log of a * integrand at a = e^v, the Jacobian of the log variable included"""
    return (1 - k / 2) * v + log_h - b * b / (2 * np.exp(v))


def log_j_family(b: float, lam: float, ks: Iterable[int] = (1, 3, 5),
                 cfg: Optional[DriftEvalConfig] = None) -> Dict[int, float]:
    """log(J_k(b, lambda) exp(-lambda^3/6)) for each k, sharing the g evaluations"""
    _check_b(b)
    cfg = cfg or DriftEvalConfig()
    ks = tuple(ks)
    split = cfg.split(b)
    anchor = math.log(split)
    step = cfg.log_step
    lower = math.log(b * b / (2 * settings.DRIFT_U_MAX))
    upper = math.log(_upper_limit(lam, split))
    j_low = int(math.floor((lower - anchor) / step))
    j_high = max(1, int(math.ceil((upper - anchor) / step)))
    v = anchor + step * np.arange(j_low, j_high + 1)
    log_h = _log_h(np.exp(v), lam, cfg)

    previous, change = None, math.inf
    for halving in range(cfg.max_halvings + 1):
        current = {k: math.log(step) + float(logsumexp(_log_terms(k, b, v, log_h))) for k in ks}
        if previous is not None:
            change = max(abs(math.expm1(current[k] - previous[k])) for k in ks)
            if change <= cfg.quad.abs_tol:
                return current
        previous = current
        if halving == cfg.max_halvings:
            break
        step /= 2
        mids = (v[:-1] + v[1:]) / 2
        mid_log_h = _log_h(np.exp(mids), lam, cfg)
        merged_v, merged_h = np.empty(2 * len(v) - 1), np.empty(2 * len(v) - 1)
        merged_v[0::2], merged_v[1::2] = v, mids
        merged_h[0::2], merged_h[1::2] = log_h, mid_log_h
        v, log_h = merged_v, merged_h

    k = ks[0]
    raise AccuracyError(f'J_{k}({b}, {lam}) did not settle', estimate=math.exp(current[k] + lam ** 3 / 6),
                        bound=change)


def eval_J(k: int, b: float, lam: float, cfg: Optional[DriftEvalConfig] = None) -> float:
    if k not in (1, 3, 5):
        raise DomainError(f'k must be 1, 3 or 5, got {k}')
    return math.exp(log_j_family(b, lam, (k,), cfg)[k] + lam ** 3 / 6)


def eval_alpha(b: float, lam: float, cfg: Optional[DriftEvalConfig] = None) -> float:
    logs = log_j_family(b, lam, (1, 3), cfg)
    return math.exp(logs[1] - logs[3])


def alpha_partial_b(b: float, lam: float, cfg: Optional[DriftEvalConfig] = None) -> float:
    """d alpha / db = b J_1 J_5 / J_3^2 - b, from d J_k / db = -b J_{k+2}"""
    logs = log_j_family(b, lam, (1, 3, 5), cfg)
    return b * math.exp(logs[1] + logs[5] - 2 * logs[3]) - b


def gamma_limits(lam: float, cfg: Optional[DriftEvalConfig] = None) -> Tuple[float, float, float]:
    """Limits of J_1, b J_3 and b^3 J_5 as b goes to 0.

    gamma_1 is the integral of a^{-1/2} I(lambda - a), taken in log a.
    """
    cfg = cfg or DriftEvalConfig()
    density = FOREST_SCALE * eval_g(FOREST_SCALE * lam, cfg.quad)
    gamma_3 = math.sqrt(2) * density * math.gamma(0.5)
    gamma_5 = 2 * math.sqrt(2) * density * math.gamma(1.5)

    lower = 2 * math.log(cfg.quad.abs_tol * 1e-2)
    upper = math.log(_upper_limit(lam, 1.0))
    step = cfg.log_step
    previous = None
    for _ in range(cfg.max_halvings + 1):
        v = np.arange(lower, upper + step, step)
        log_value = math.log(step) + float(logsumexp(0.5 * v + _log_h(np.exp(v), lam, cfg)))
        if previous is not None and abs(math.expm1(log_value - previous)) <= cfg.quad.abs_tol:
            break
        previous = log_value
        step /= 2
    gamma_1 = math.exp(log_value + lam ** 3 / 6)
    return gamma_1, gamma_3, gamma_5


def alpha_monte_carlo(b: float, lam: float, samples: int, rng: np.random.Generator,
                      cfg: Optional[DriftEvalConfig] = None) -> Tuple[float, float]:
    """Importance-sampling estimate of alpha and its standard error.

    a is drawn from the Levy law with density proportional to a^{-3/2} exp(-b^2/2a), i.e. a = b^2 / (2 G) with G
    Gamma(1/2); then J_3 is proportional to E I(lambda - a) and J_1 to E[a I(lambda - a)] with the same constant.
    Draws past the upper limit of the quadrature carry no weight.
    """
    _check_b(b)
    cfg = cfg or DriftEvalConfig.hot()
    a = b * b / (2 * rng.gamma(0.5, size=samples))
    near = a <= _upper_limit(lam, max(b * b, 0.5))
    log_h = np.full(a.shape, -np.inf)
    log_h[near] = _log_h(a[near], lam, cfg)
    weights = np.exp(log_h - log_h.max())
    x, y = weights, a * weights
    ratio = y.mean() / x.mean()
    error = np.sqrt(np.var(y - ratio * x, ddof=1) / samples) / x.mean()
    return float(ratio), float(error)


class AlphaTable:
    """Bicubic interpolation of alpha on a (b, lambda) grid, with alpha(0, .) = 0.

    Points outside the grid are evaluated by direct quadrature.
    """

    def __init__(self, bs: np.ndarray, lambdas: np.ndarray, values: np.ndarray,
                 cfg: Optional[DriftEvalConfig] = None):
        self.bs = np.asarray(bs, dtype=float)
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.cfg = cfg or DriftEvalConfig.hot()
        self._spline = RectBivariateSpline(self.bs, self.lambdas, self.values, kx=3, ky=3)
        self.logger = logging.getLogger(self.__class__.__name__)

    @classmethod
    def build(cls, b_max: float = None, b_step: float = None, lambda_range: Tuple[float, float] = None,
              lambda_step: float = None, cfg: Optional[DriftEvalConfig] = None) -> 'AlphaTable':
        b_max = settings.ALPHA_TABLE_B_MAX if b_max is None else b_max
        b_step = settings.ALPHA_TABLE_B_STEP if b_step is None else b_step
        lambda_range = settings.ALPHA_TABLE_LAMBDA if lambda_range is None else lambda_range
        lambda_step = settings.ALPHA_TABLE_LAMBDA_STEP if lambda_step is None else lambda_step
        cfg = cfg or DriftEvalConfig.hot()

        bs = np.linspace(0.0, b_max, int(round(b_max / b_step)) + 1)
        lambdas = np.linspace(lambda_range[0], lambda_range[1],
                              int(round((lambda_range[1] - lambda_range[0]) / lambda_step)) + 1)
        logger.info(f'Building alpha table with {len(bs)} x {len(lambdas)} nodes')
        values = np.zeros((len(bs), len(lambdas)))
        for column, lam in enumerate(lambdas):
            values[1:, column] = _alpha_column(bs[1:], lam, cfg)
        return cls(bs, lambdas, values, cfg)

    @classmethod
    def load_or_build(cls, cache_dir: Optional[Path] = None) -> 'AlphaTable':
        from critforest.scaling.artifacts.table_format import AlphaTableFormat

        cache_dir = Path(cache_dir or settings.CACHE_DIR)
        lo, hi = settings.ALPHA_TABLE_LAMBDA
        path = cache_dir / (f'alpha_r{TABLE_REVISION}_{settings.ALPHA_TABLE_B_MAX:g}_'
                            f'{settings.ALPHA_TABLE_B_STEP:g}_{lo:g}_{hi:g}_{settings.ALPHA_TABLE_LAMBDA_STEP:g}.bin')
        if path.is_file():
            return cls(*AlphaTableFormat().read(path))
        table = cls.build()
        try:
            cache_dir.mkdir(parents=True, exist_ok=True)
            table.save(path)
        except OSError as e:
            logger.warning(f'Could not cache the alpha table in {cache_dir}: {e}')
        return table

    def save(self, path: Path, manifest: Optional[dict] = None):
        from critforest.scaling.artifacts.table_format import AlphaTableFormat

        AlphaTableFormat().write(path, self.bs, self.lambdas, self.values, manifest=manifest)

    def inside(self, b: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return ((b >= 0) & (b <= self.bs[-1]) & (lam >= self.lambdas[0]) & (lam <= self.lambdas[-1]))

    def __call__(self, b, lam) -> np.ndarray:
        b, lam = np.broadcast_arrays(np.asarray(b, dtype=float), np.asarray(lam, dtype=float))
        shape = b.shape
        b, lam = np.atleast_1d(b).ravel(), np.atleast_1d(lam).ravel()
        result = np.zeros(b.shape)
        inside = self.inside(b, lam)
        if inside.any():
            result[inside] = self._spline.ev(b[inside], lam[inside])
        outside = ~inside & (b > 0)
        for index in np.flatnonzero(outside):
            result[index] = eval_alpha(float(b[index]), float(lam[index]), self.cfg)
        result[b <= 0] = 0.0
        return np.maximum(result, 0.0).reshape(shape)

    def validate(self, points: int, rng: np.random.Generator, cfg: Optional[DriftEvalConfig] = None,
                 tolerance: float = None) -> float:
        """Largest absolute gap to direct quadrature over random interior points"""
        tolerance = settings.ALPHA_TABLE_TOLERANCE if tolerance is None else tolerance
        cfg = cfg or DriftEvalConfig()
        bs = rng.uniform(self.bs[1], self.bs[-1], size=points)
        lambdas = rng.uniform(self.lambdas[0], self.lambdas[-1], size=points)
        gap = max(abs(float(self(b, lam)) - eval_alpha(b, lam, cfg)) for b, lam in zip(bs, lambdas))
        self.logger.info(f'Alpha table validated on {points} points, largest gap {gap:.3g}')
        if gap > tolerance:
            raise AccuracyError('alpha table disagrees with direct quadrature', estimate=gap, bound=tolerance)
        return gap


def _alpha_column(bs: np.ndarray, lam: float, cfg: DriftEvalConfig) -> np.ndarray:
    """alpha for many b at one lambda on a common log a grid, refined until stable"""
    lower = math.log(bs.min() ** 2 / (2 * settings.DRIFT_U_MAX))
    upper = math.log(_upper_limit(lam, max(bs.max() ** 2, 0.5)))
    step = cfg.log_step
    previous, change = None, math.inf
    for _ in range(cfg.max_halvings + 1):
        v = np.arange(lower, upper + step, step)
        log_h = _log_h(np.exp(v), lam, cfg)
        penalty = bs[:, None] ** 2 / (2 * np.exp(v))[None, :]
        log_j1 = logsumexp(0.5 * v + log_h - penalty, axis=1)
        log_j3 = logsumexp(-0.5 * v + log_h - penalty, axis=1)
        alpha = np.exp(log_j1 - log_j3)
        if previous is not None:
            change = float(np.max(np.abs(alpha - previous)))
            if change <= cfg.quad.abs_tol:
                return alpha
        previous = alpha
        step /= 2
    raise AccuracyError(f'alpha column at lambda={lam} did not settle', estimate=float(alpha.max()), bound=change)


@lru_cache(maxsize=1)
def default_alpha_table() -> AlphaTable:
    return AlphaTable.load_or_build()
