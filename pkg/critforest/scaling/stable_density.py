"""The stable density g(x) = (1/pi) int_0^inf exp(-(4/3) t^{3/2}) cos(x t + (4/3) t^{3/2}) dt.

g is the real part of (1/pi) int_0^inf exp(psi(t)) dt with psi(t) = i x t - (4/3)(1 - i) t^{3/2}. The integrand is
analytic off the negative real axis, so the path is moved to keep tiny values accurate:

* x >= 0: the ray arg t = pi/6, on which the t^{3/2} term is real and e^{-x s / 2} damps the rest.
* x < 0: the horizontal line through the saddle -i x^2/8. The vertical piece from 0 down to the saddle
  contributes a purely imaginary amount, so only the line counts. Values there are about exp(-|x|^3/24), and
  the exponent is carried separately (see :func:`log_eval_g`).

The right tail is heavy, g(x) ~ sqrt(2/pi) x^{-5/2}; the left tail vanishes faster than any exponential.

Forest counts see g through the rescaled density 2^{2/3} g(2^{2/3} x), see :func:`forest_density`.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from critforest.scaling import settings
from critforest.scaling.errors import AccuracyError, DomainError

logger = logging.getLogger(__name__)

C = 4 / 3
RIGHT_TAIL_CONSTANT = math.sqrt(2 / math.pi)
FOREST_SCALE = 2 ** (2 / 3)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = field(default_factory=lambda: settings.G_ABS_TOL)
    truncation_tail: float = field(default_factory=lambda: settings.G_TRUNCATION_TAIL)
    max_subdivisions: int = field(default_factory=lambda: settings.G_MAX_SUBDIVISIONS)

    def __post_init__(self):
        if self.abs_tol <= 0:
            raise DomainError('abs_tol must be positive')
        if not 0 < self.truncation_tail < self.abs_tol:
            raise DomainError('truncation_tail must lie in (0, abs_tol)')
        if self.max_subdivisions < 1:
            raise DomainError('max_subdivisions must be positive')

    @classmethod
    def hot(cls) -> 'QuadratureConfig':
        return cls(abs_tol=settings.G_HOT_ABS_TOL)

    @property
    def truncation_point(self) -> float:
        """T with exp(-(4/3) T^{3/2}) = truncation_tail"""
        return (math.log(1 / self.truncation_tail) / C) ** (2 / 3)


@lru_cache(maxsize=4)
def _gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(order)


def panel_quadrature(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, width: float, tol: float,
                     max_subdivisions: int) -> Tuple[complex, float]:
    """Integrate `func` (vectorized, real or complex) over [lo, hi].

    Panels start no wider than `width`; each is integrated with 16 and 8 point Gauss-Legendre rules and panels
    whose disagreement exceeds their share of `tol` are bisected. Returns the estimate and the summed error.
    """
    nodes16, weights16 = _gauss_legendre(16)
    nodes8, weights8 = _gauss_legendre(8)
    count = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, count + 1)
    left, right = edges[:-1], edges[1:]

    accepted_value, accepted_error = 0.0, 0.0
    subdivisions = 0
    while True:
        half, mid = (right - left) / 2, (right + left) / 2
        fine = (func(mid[:, None] + half[:, None] * nodes16) @ weights16) * half
        coarse = (func(mid[:, None] + half[:, None] * nodes8) @ weights8) * half
        errors = np.abs(fine - coarse)
        share = tol * (right - left) / (hi - lo)
        good = errors <= share
        accepted_value = accepted_value + fine[good].sum()
        accepted_error += errors[good].sum()
        if good.all():
            return accepted_value, accepted_error
        subdivisions += int((~good).sum())
        if subdivisions > max_subdivisions:
            estimate = accepted_value + fine[~good].sum()
            raise AccuracyError('panel quadrature exceeded its subdivision budget', estimate=estimate,
                                bound=float(accepted_error + errors[~good].sum()))
        left, right = left[~good], right[~good]
        mid = (left + right) / 2
        left, right = np.concatenate([left, mid]), np.concatenate([mid, right])


def _psi(x: float, t: np.ndarray) -> np.ndarray:
    return 1j * x * t - C * (1 - 1j) * t ** 1.5


def _saddle(x: float) -> complex:
    return -1j * x * x / 8


def _saddle_offset(x: float, s: np.ndarray) -> np.ndarray:
    """psi(t0 + s) - psi(t0) for x < 0, written in d = sqrt(t0 + s) - sqrt(t0) so nothing of size |x|^3 cancels.

    The linear term vanishes at the saddle, leaving i |x| d^2 - (4/3)(1 - i) d^3.
    """
    root = abs(x) * (1 - 1j) / 4
    d = s / (np.sqrt(_saddle(x) + s) + root)
    return 1j * abs(x) * d * d - C * (1 - 1j) * d ** 3


def _contour(x: float, cfg: QuadratureConfig):
    """(exponent, direction, length, log_scale, frequency) of the integration path.

    `exponent(s)` is psi along the path minus `log_scale`; `frequency` bounds |psi'| on it and sets the panel width.
    """
    T = cfg.truncation_point
    log_tail = math.log(1 / cfg.truncation_tail)
    if x >= 0:
        direction = complex(math.cos(math.pi / 6), math.sin(math.pi / 6))
        length = T if x == 0 else min(T, 2 * log_tail / x)
        return lambda s: _psi(x, direction * s), direction, length, 0.0, abs(x) + math.sqrt(T)

    def exponent(s):
        return _saddle_offset(x, s)

    length = T + math.sqrt(abs(x) * log_tail)
    while np.real(exponent(np.array([length]))[0]) > math.log(cfg.truncation_tail * 1e-2):
        length *= 1.5
    # |psi'| grows away from the saddle, so the far end bounds it
    slope = abs(1j * x - 2 * (1 - 1j) * np.sqrt(_saddle(x) + length))
    return exponent, 1 + 0j, length, -abs(x) ** 3 / 24, max(1.0, slope)


def _contour_integral(x: float, cfg: QuadratureConfig) -> Tuple[float, float]:
    """log scale L and the normalized integral I, with g(x) = exp(L) * I"""
    exponent, direction, length, log_scale, frequency = _contour(x, cfg)

    def integrand(s):
        return np.exp(exponent(s)) * direction

    value, _ = panel_quadrature(integrand, 0.0, length, math.pi / (4 * frequency), math.pi * cfg.abs_tol,
                                cfg.max_subdivisions)
    return log_scale, float(np.real(value)) / math.pi


def eval_g(x: float, cfg: Optional[QuadratureConfig] = None) -> float:
    if not math.isfinite(x):
        raise DomainError(f'x must be finite, got {x}')
    log_scale, value = _contour_integral(float(x), cfg or QuadratureConfig())
    return math.exp(log_scale) * value


def log_eval_g(x: float, cfg: Optional[QuadratureConfig] = None) -> float:
    """log g(x), finite far into the left tail where g itself underflows"""
    if not math.isfinite(x):
        raise DomainError(f'x must be finite, got {x}')
    log_scale, value = _contour_integral(float(x), cfg or QuadratureConfig())
    if value <= 0:
        raise AccuracyError(f'g({x}) not resolved to a positive value', estimate=value, bound=cfg.abs_tol
                            if cfg else settings.G_ABS_TOL)
    return log_scale + math.log(value)


def eval_g_array(xs, cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    cfg = cfg or QuadratureConfig()
    return np.array([eval_g(x, cfg) for x in np.ravel(xs)]).reshape(np.shape(xs))


def log_eval_g_array(xs, cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    cfg = cfg or QuadratureConfig()
    return np.array([log_eval_g(x, cfg) for x in np.ravel(xs)]).reshape(np.shape(xs))


def eval_g_tanh_sinh(x: float, tail: float = 1e-16, tol: float = 1e-13, max_level: int = 12) -> float:
    """Second, independent scheme: the real-axis integral on [0, T] by the tanh-sinh rule.

    Only meant for moderate |x|, where the real-axis integrand does not cancel catastrophically.
    """
    T = (math.log(1 / tail) / C) ** (2 / 3)

    def integrand(t):
        return np.exp(-C * t ** 1.5) * np.cos(x * t + C * t ** 1.5)

    previous = None
    for level in range(3, max_level + 1):
        h = 2.0 ** -level
        u = np.arange(-4.0, 4.0 + h / 2, h)
        inner = math.pi / 2 * np.sinh(u)
        t = T / 2 * (1 + np.tanh(inner))
        weights = T / 2 * (math.pi / 2) * np.cosh(u) / np.cosh(inner) ** 2
        value = h * np.sum(weights * integrand(t)) / math.pi
        if previous is not None and abs(value - previous) < tol:
            return float(value)
        previous = value
    raise AccuracyError('tanh-sinh rule did not settle', estimate=float(previous), bound=tol)


def g_zero_closed_form() -> float:
    """g(0) = (2/3) (4/3)^{-2/3} Gamma(2/3) 2^{-1/3} cos(pi/6) / pi"""
    return 2 / 3 * C ** (-2 / 3) * math.gamma(2 / 3) * 2 ** (-1 / 3) * math.cos(math.pi / 6) / math.pi


def right_tail(x: float) -> float:
    """Leading term of g at +infinity; the next real term is O(x^{-11/2})"""
    return RIGHT_TAIL_CONSTANT * x ** -2.5


def _difference_kernel(lo: float, hi: float):
    def integrand(t):
        phase = C * t ** 1.5
        return (np.exp(-phase) * np.cos((hi + lo) / 2 * t + phase) * (hi - lo) * np.sinc((hi - lo) * t / (2 * math.pi)))
    return integrand


def cdf_g(x: float, cfg: Optional[QuadratureConfig] = None) -> float:
    """int_{-inf}^x g = 1/2 + (1/pi) int_0^inf exp(-(4/3) t^{3/2}) sin(x t + (4/3) t^{3/2}) / t dt"""
    cfg = cfg or QuadratureConfig()
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    T = cfg.truncation_point

    def integrand(t):
        phase = C * t ** 1.5
        with np.errstate(invalid='ignore', divide='ignore'):
            ratio = np.where(t > 0, np.sin(x * t + phase) / np.where(t > 0, t, 1.0), x)
        return np.exp(-phase) * ratio

    value, _ = panel_quadrature(integrand, 0.0, T, math.pi / (4 * (abs(x) + math.sqrt(T))), math.pi * cfg.abs_tol,
                                cfg.max_subdivisions)
    return 0.5 + float(value) / math.pi


def integrate_g(lo: float, hi: float, cfg: Optional[QuadratureConfig] = None) -> float:
    """int_lo^hi g, either bound may be infinite"""
    cfg = cfg or QuadratureConfig()
    if lo > hi:
        raise DomainError(f'need lo <= hi, got {lo} > {hi}')
    if lo == hi:
        return 0.0
    if math.isinf(lo) or math.isinf(hi):
        return cdf_g(hi, cfg) - cdf_g(lo, cfg)
    T = cfg.truncation_point
    width = math.pi / (4 * (max(abs(lo), abs(hi)) + math.sqrt(T)))
    value, _ = panel_quadrature(_difference_kernel(lo, hi), 0.0, T, width, math.pi * cfg.abs_tol * (hi - lo),
                                cfg.max_subdivisions)
    return float(value) / math.pi


class GDensityGrid:
    """Cubic spline of log g on a uniform grid, for loops that evaluate g millions of times.

    Outside the grid the exact quadrature is used. The grid is read-only once built.
    """

    def __init__(self, xs: np.ndarray, log_values: np.ndarray, cfg: Optional[QuadratureConfig] = None):
        self.xs = np.asarray(xs, dtype=float)
        self.log_values = np.asarray(log_values, dtype=float)
        self.cfg = cfg or QuadratureConfig.hot()
        self._spline = CubicSpline(self.xs, self.log_values)
        self.logger = logging.getLogger(self.__class__.__name__)

    @classmethod
    def build(cls, lo: float = None, hi: float = None, step: float = None,
              cfg: Optional[QuadratureConfig] = None) -> 'GDensityGrid':
        lo, hi = settings.G_GRID_RANGE if lo is None else (lo, hi)
        step = settings.G_GRID_STEP if step is None else step
        cfg = cfg or QuadratureConfig.hot()
        xs = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
        logger.info(f'Building log g grid on [{lo}, {hi}] with {len(xs)} points')
        return cls(xs, log_eval_g_array(xs, cfg), cfg)

    @classmethod
    def load_or_build(cls, cache_dir: Optional[Path] = None) -> 'GDensityGrid':
        from critforest.scaling.artifacts.table_format import GridFormat

        cache_dir = Path(cache_dir or settings.CACHE_DIR)
        lo, hi = settings.G_GRID_RANGE
        path = cache_dir / f'log_g_{lo:g}_{hi:g}_{settings.G_GRID_STEP:g}.bin'
        if path.is_file():
            xs, values = GridFormat().read(path)
            return cls(xs, values)
        grid = cls.build()
        try:
            cache_dir.mkdir(parents=True, exist_ok=True)
            GridFormat().write(path, grid.xs, grid.log_values)
        except OSError as e:
            logger.warning(f'Could not cache the g grid in {cache_dir}: {e}')
        return grid

    @property
    def bounds(self) -> Tuple[float, float]:
        return float(self.xs[0]), float(self.xs[-1])

    def log_g(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        result = self._spline(xs)
        outside = (xs < self.xs[0]) | (xs > self.xs[-1])
        if outside.any():
            result = np.array(result, dtype=float)
            result[outside] = log_eval_g_array(xs[outside], self.cfg)
        return result

    def g(self, xs) -> np.ndarray:
        return np.exp(self.log_g(xs))

    def __call__(self, x: float) -> float:
        return float(self.g(x))


@lru_cache(maxsize=1)
def default_grid() -> GDensityGrid:
    return GDensityGrid.load_or_build()


def g_evaluator(cfg: Optional[QuadratureConfig] = None) -> Callable[[float], float]:
    cfg = cfg or QuadratureConfig()
    return lambda x: eval_g(x, cfg)


def forest_density(x: float, g_eval: Optional[Callable[[float], float]] = None) -> float:
    """2^{2/3} g(2^{2/3} x), the form in which g enters the forest-count asymptotics"""
    g_eval = g_eval or g_evaluator()
    return FOREST_SCALE * g_eval(FOREST_SCALE * x)
