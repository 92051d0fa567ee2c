"""Exact and asymptotic forest counts, acyclicity and stack-forest probabilities.

Every count lives in natural-log space. Two exact routes exist:

* :class:`LogCountTable` holds log f(n, m) for all n up to its size, built from the decomposition over the
  component of the smallest label. Memory is quadratic and build time cubic in the size.
* :func:`acyclic_log_profile` runs the same decomposition directly in p, giving log f(n, p) for every n up to
  N at the cost of one truncated sum per n. It backs every p-dependent quantity when no table covers N.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from critforest.scaling import settings
from critforest.scaling.errors import CapacityError, DomainError
from critforest.scaling.stable_density import forest_density

logger = logging.getLogger(__name__)

DensityEvaluator = Callable[[float], float]

_CHUNK = 512


@lru_cache(maxsize=8)
def log_factorials(n: int) -> np.ndarray:
    """log i! for i = 0..n"""
    values = gammaln(np.arange(n + 1, dtype=float) + 1)
    values.flags.writeable = False
    return values


def log_binom(n, k):
    return gammaln(np.add(n, 1.0)) - gammaln(np.add(k, 1.0)) - gammaln(np.subtract(n, k) + 1.0)


def critical_p(N: int, Lambda: float) -> float:
    """Edge probability with N^{1/3}(Np - 1) = Lambda"""
    return (1 + Lambda * N ** (-1 / 3)) / N


def critical_m(N: int, x: float = 0.0) -> int:
    """Edge count with (2m - N) / N^{2/3} closest to x"""
    return int(math.ceil(N / 2 + x * N ** (2 / 3) / 2))


@dataclass(frozen=True)
class ScalingParams:
    N: int
    p: Optional[float] = None
    m: Optional[int] = None
    r: Optional[int] = None
    k: Optional[int] = None
    N_prime: Optional[int] = None

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f'N must be positive, got {self.N}')
        if self.p is not None and not 0 < self.p < 1:
            raise DomainError(f'p must lie in (0, 1), got {self.p}')
        if self.m is not None and not 0 <= self.m <= self.N - 1:
            raise DomainError(f'm must lie in [0, N-1], got {self.m}')
        chain = [value for value in (self.r, self.k, self.N_prime, self.N) if value is not None]
        if any(low > high for low, high in zip(chain, chain[1:])):
            raise DomainError(f'need r <= k <= N\' <= N, got r={self.r} k={self.k} N\'={self.N_prime} N={self.N}')

    @property
    def Lambda(self) -> float:
        if self.p is not None:
            return self.N ** (1 / 3) * (self.N * self.p - 1)
        if self.m is not None:
            return (2 * self.m - self.N) / self.N ** (2 / 3)
        raise DomainError('Lambda needs p or m')

    @property
    def a(self) -> float:
        return self.k / self.N ** (2 / 3)

    @property
    def b(self) -> float:
        return self.r / self.N ** (1 / 3)

    @property
    def s(self) -> float:
        N_prime = self.N if self.N_prime is None else self.N_prime
        return (self.N - N_prime) / self.N ** (2 / 3)


def scaling_params(N: int, p: Optional[float] = None, m: Optional[int] = None, Lambda: Optional[float] = None,
                   r: Optional[int] = None, k: Optional[int] = None, N_prime: Optional[int] = None) -> ScalingParams:
    """ScalingParams from p, m or Lambda; Lambda is turned into the critical p"""
    if sum(value is not None for value in (p, m, Lambda)) > 1:
        raise DomainError('give at most one of p, m and Lambda')
    if Lambda is not None:
        p = critical_p(N, Lambda)
    return ScalingParams(N, p=p, m=m, r=r, k=k, N_prime=N_prime)


class LogCountTable:
    """log f(n, m), the number of forests on n labelled vertices with m edges, for all n <= max_vertices.

    Entries are stored by component count c = n - m. The row of n is obtained from the rows of n - k by
    summing over the size k of the component holding the smallest label, which carries one of k^{k-2}
    trees on labels chosen in C(n-1, k-1) ways.
    """

    def __init__(self, max_vertices: int, capacity: Optional[int] = None):
        capacity = settings.TABLE_CAPACITY if capacity is None else capacity
        if max_vertices < 0:
            raise DomainError(f'max_vertices must be non-negative, got {max_vertices}')
        if max_vertices > capacity:
            raise CapacityError(max_vertices, capacity, what='table capacity')

        self.max_vertices = max_vertices
        self.logger = logging.getLogger(self.__class__.__name__)
        self._by_components = self._build(max_vertices)
        self._by_components.flags.writeable = False

    def _build(self, size: int) -> np.ndarray:
        self.logger.debug(f'Building forest count table up to {size} vertices')
        lg = log_factorials(max(size, 1))
        log_k = np.log(np.arange(1, size + 1, dtype=float))
        table = np.full((size + 1, size + 1), -np.inf)
        table[0, 0] = 0.0
        with np.errstate(invalid='ignore', divide='ignore'):
            for n in range(1, size + 1):
                ks = np.arange(1, n + 1)
                log_weights = lg[n - 1] - lg[ks - 1] - lg[n - ks] + (ks - 2) * log_k[ks - 1]
                terms = log_weights[:, None] + table[n - 1::-1, :n]
                table[n, 1:n + 1] = logsumexp(terms, axis=0)
        return table

    def covers(self, N: int) -> bool:
        return N <= self.max_vertices

    def entry(self, N: int, m: int) -> float:
        return float(self._by_components[N, N - m])

    def by_components(self, ns, c: int) -> np.ndarray:
        """log of the number of forests on n vertices with c trees, for each n in ns"""
        ns = np.asarray(ns)
        if c < 0 or c > self.max_vertices:
            return np.full(ns.shape, -np.inf)
        return self._by_components[ns, c]

    def row(self, N: int) -> np.ndarray:
        """log f(N, m) for m = 0..N-1 (m = 0 only when N = 0)"""
        if N == 0:
            return np.zeros(1)
        return self._by_components[N, N:0:-1].copy()


def _check_forest_range(N: int, m: int):
    if N < 0 or m < 0 or (m > N - 1 and not (N == 0 and m == 0)):
        raise DomainError(f'no forest with {m} edges on {N} vertices')


def forest_count_log(table: LogCountTable, N: int, m: int) -> float:
    _check_forest_range(N, m)
    if not table.covers(N):
        raise CapacityError(N, table.max_vertices)
    return table.entry(N, m)


def forest_count_exact(N: int, m: int) -> int:
    """Exact f(N, m) as a Python integer.

    Expands U^c for the unrooted-tree generating function U = T - T^2/2 in powers of the rooted-tree function
    T and applies Lagrange inversion, c = N - m being the number of trees. The alternating sum is exact in
    integers, so single entries far beyond the table size are cheap.
    """
    _check_forest_range(N, m)
    if N == 0:
        return 1
    c = N - m
    total = 0
    for j in range(0, min(c, N - c) + 1):
        term = math.comb(c, j) * 2 ** (c - j) * (c + j) * N ** (N - c - j) * math.perm(N - c, j)
        total += -term if j % 2 else term
    total *= math.comb(N, c)
    count, remainder = divmod(total, N * 2 ** c)
    assert remainder == 0, 'closed form must give an integer'
    return count


def forest_count_log_any(table: Optional[LogCountTable], N: int, m: int) -> float:
    """log f(N, m) from the table when it covers N, from the exact integer formula otherwise"""
    if table is not None and table.covers(N):
        return forest_count_log(table, N, m)
    return math.log(forest_count_exact(N, m))


class Asymptotic(NamedTuple):
    log_value: float
    argument: float
    in_window: bool

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def britikov_asymptotic(N: int, m: int, g_eval: DensityEvaluator, window: float = 3.0) -> Asymptotic:
    """Leading-order estimate of f(N, m) in the critical window.

    The result is in log space since f(N, m) overflows floats long before the window gets interesting.
    Outside |2m - N| <= window * N^{2/3} the estimate is still returned but flagged.
    """
    _check_forest_range(N, m)
    x = (2 * m - N) / N ** (2 / 3)
    density = forest_density(x, g_eval)
    if density <= 0:
        raise DomainError(f'density evaluates to {density} at {x}')
    log_value = (0.5 * math.log(2 * math.pi) + (N - 1 / 6) * math.log(N) + math.log(density)
                 - (N - m) * math.log(2) - gammaln(N - m + 1))
    in_window = abs(2 * m - N) <= window * N ** (2 / 3)
    if not in_window:
        logger.warning(f'm={m} lies outside the critical window of N={N}')
    return Asymptotic(float(log_value), x, in_window)


def britikov_ratio(table: Optional[LogCountTable], N: int, m: int, g_eval: DensityEvaluator) -> float:
    """exact / asymptotic for f(N, m)"""
    return math.exp(forest_count_log_any(table, N, m) - britikov_asymptotic(N, m, g_eval).log_value)


@lru_cache(maxsize=16)
def acyclic_log_profile(N: int, p: float) -> np.ndarray:
    """log f(n, p) = log P(G(n, p) is acyclic) for n = 0..N.

    The component of the smallest label has size k with weight C(n-1, k-1) k^{k-2} p^{k-1} times (1-p) to the
    number of absent slots inside it and towards the rest. The sum over k is cut once a whole chunk of
    decreasing terms lies LOG_SUM_CUTOFF below the running total.
    """
    if not 0 < p < 1:
        raise DomainError(f'p must lie in (0, 1), got {p}')
    lg = log_factorials(max(N, 1))
    log_k = np.log(np.arange(1, N + 1, dtype=float))
    log_p, log_q = math.log(p), math.log1p(-p)
    cutoff = settings.LOG_SUM_CUTOFF

    profile = np.zeros(N + 1)
    for n in range(2, N + 1):
        total = -np.inf
        start = 1
        while start <= n:
            ks = np.arange(start, min(n, start + _CHUNK - 1) + 1, dtype=np.int64)
            absent = ks * (ks - 1) // 2 - (ks - 1) + ks * (n - ks)
            terms = (lg[n - 1] - lg[ks - 1] - lg[n - ks] + (ks - 2) * log_k[ks - 1]
                     + (ks - 1) * log_p + absent * log_q + profile[n - ks])
            total = np.logaddexp(total, logsumexp(terms))
            if terms.max() < total - cutoff and terms[-1] <= terms[0]:
                break
            start += _CHUNK
        profile[n] = total
    profile.flags.writeable = False
    return profile


def _acyclic_logs(table: Optional[LogCountTable], N: int, p: float) -> np.ndarray:
    if table is not None and table.covers(N):
        log_ratio = math.log(p) - math.log1p(-p)
        log_q = math.log1p(-p)
        logs = np.empty(N + 1)
        for n in range(N + 1):
            row = table.row(n)
            logs[n] = logsumexp(row + np.arange(len(row)) * log_ratio) + n * (n - 1) / 2 * log_q
        return logs
    return acyclic_log_profile(N, p)


def acyclic_prob_exact(table: Optional[LogCountTable], N: int, p: float) -> float:
    """P(G(N, p) is acyclic), summed over edge counts when the table covers N"""
    if not 0 < p < 1:
        raise DomainError(f'p must lie in (0, 1), got {p}')
    if N <= 2:
        return 1.0
    if table is not None and table.covers(N):
        row = table.row(N)
        log_value = (logsumexp(row + np.arange(N) * (math.log(p) - math.log1p(-p)))
                     + N * (N - 1) / 2 * math.log1p(-p))
    else:
        log_value = acyclic_log_profile(N, p)[N]
    return float(min(1.0, math.exp(log_value)))


def acyclic_prob_asymptotic(N: int, p: float, g_eval: DensityEvaluator) -> float:
    """sqrt(2 pi) e^{3/4} N^{-1/6} e^{-Lambda^3/6} 2^{2/3} g(2^{2/3} Lambda)"""
    Lambda = ScalingParams(N, p=p).Lambda
    tilt = math.exp(0.75 - Lambda ** 3 / 6)
    return forest_density(Lambda, g_eval) * tilt * math.sqrt(2 * math.pi) * N ** (-1 / 6)


def _log_stack_terms(acyclic_logs: np.ndarray, N: int, r: int, ks: np.ndarray, p: float) -> np.ndarray:
    log_p, log_q = math.log(p), math.log1p(-p)
    ks = np.asarray(ks, dtype=np.int64)
    touching = ks * (2 * N - ks - 1) // 2
    return (touching * log_q + log_binom(N - r, ks - r) + (ks - r) * (log_p - log_q) + math.log(r)
            + (ks - r - 1) * np.log(ks) + acyclic_logs[N - ks])


def _check_stack(N: int, r: int, k: int, p: float):
    if not 1 <= r <= k <= N:
        raise DomainError(f'need 1 <= r <= k <= N, got r={r} k={k} N={N}')
    if not 0 < p < 1:
        raise DomainError(f'p must lie in (0, 1), got {p}')


def stack_forest_event_prob(table: Optional[LogCountTable], N: int, r: int, k: int, p: float) -> float:
    """P(G(N, p) is a forest in which the labels 1..r lie in distinct trees of total size k)"""
    _check_stack(N, r, k, p)
    logs = _acyclic_logs(table, N, p)
    return float(np.exp(_log_stack_terms(logs, N, r, np.array([k]), p)[0]))


def _stack_distribution(table, N: int, r: int, p: float):
    logs = _acyclic_logs(table, N, p)
    ks = np.arange(r, N + 1)
    return ks, _log_stack_terms(logs, N, r, ks, p), logs


def expected_stack_forest_exact(table: Optional[LogCountTable], N: int, r: int, p: float) -> float:
    _check_stack(N, r, r, p)
    ks, terms, _ = _stack_distribution(table, N, r, p)
    return float(np.exp(logsumexp(terms + np.log(ks)) - logsumexp(terms)))


def separation_prob(table: Optional[LogCountTable], N: int, r: int, p: float) -> float:
    """P(labels 1..r lie in distinct trees of F(N, p))"""
    if r <= 1:
        return 1.0
    _check_stack(N, r, r, p)
    ks, terms, logs = _stack_distribution(table, N, r, p)
    return float(min(1.0, np.exp(logsumexp(terms) - logs[N])))


def separation_ratio(table: Optional[LogCountTable], N: int, r: int, p: float) -> float:
    """P(A_{N,r+1}) / P(A_{N,r}) through the expected stack-forest size, (N - E k_r) / (N - r)"""
    if not 1 <= r < N:
        raise DomainError(f'need 1 <= r < N, got r={r} N={N}')
    return (N - expected_stack_forest_exact(table, N, r, p)) / (N - r)


def stack_forest_asymptotic(N: int, N_prime: int, r: int, k: int, p: float, g_eval: DensityEvaluator) -> float:
    if k == 0:
        raise DomainError('stack forest size must be positive (a = 0)')
    if r <= 0:
        raise DomainError('stack size must be positive (b > 0)')
    params = ScalingParams(N, p=p, r=r, k=k, N_prime=N_prime)
    shifted = params.Lambda - params.s
    return stack_forest_asymptotic_scaled(N, params.a, params.b, shifted, g_eval)


def stack_forest_asymptotic_scaled(N: int, a: float, b: float, shifted: float, g_eval: DensityEvaluator) -> float:
    """The stack-forest estimate as a function of (a, b, Lambda - s)"""
    if a <= 0:
        raise DomainError('a must be positive')
    exponent = 0.75 - b * shifted - b * b / (2 * a) - shifted ** 3 / 6
    return forest_density(shifted - a, g_eval) * N ** (-5 / 6) * b * a ** (-1.5) * math.exp(exponent)
