"""Acceptance gates grouped by scale tier.

small runs in seconds against enumeration oracles, medium in minutes up to N ~ 10^4, large in tens of minutes at
N = 10^5. Every gate yields a GateResult; a gate that raises is recorded as failed with the error in its detail.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from critforest.scaling import enumeration
from critforest.scaling.analysis import (
    SizeSample, chi_square_two_sample, chi_square_uniform, galton_watson_mean_bound, ks_distance, weak_majorises,
)
from critforest.scaling.combinatorics import (
    LogCountTable, acyclic_prob_asymptotic, acyclic_prob_exact, britikov_ratio, critical_p, stack_forest_event_prob,
)
from critforest.scaling.diffusion import simulate_ensemble
from critforest.scaling.drift import DriftEvalConfig, alpha_partial_b, default_alpha_table, eval_J, eval_alpha
from critforest.scaling.ensemble import EnsembleRunner
from critforest.scaling.errors import CritForestError, DomainError
from critforest.scaling.experiments import (
    _embedding_task, forest_size_sample, monotone_rate, sequential_check, uniform_tree_check,
    uniform_vertex_component_mean,
)
from critforest.scaling.exploration import empirical_increment_stats, explore, kernel_for, simulate_kernel_ensemble
from critforest.scaling.samplers import EXACT, REJECTION, sample_forest_nm, sample_forest_np
from critforest.scaling.stable_density import (
    RIGHT_TAIL_CONSTANT, QuadratureConfig, eval_g, g_evaluator, integrate_g, right_tail,
)
from critforest.scaling.utils import child_rng

TIERS = ('small', 'medium', 'large')


@dataclass(frozen=True)
class GateResult:
    name: str
    statistic: float
    gate: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {'name': self.name, 'statistic': self.statistic, 'gate': self.gate, 'passed': self.passed,
                'detail': self.detail}


class Verifier:
    def __init__(self, seed: int = 0, runner: Optional[EnsembleRunner] = None, progress: bool = False):
        self.seed = seed
        self.runner = runner or EnsembleRunner(progress=progress)
        self.progress = progress
        self.gates: Dict[str, List[Callable[[], GateResult]]] = {tier: [] for tier in TIERS}
        self.logger = logging.getLogger(self.__class__.__name__)

        self.add_gate('small', self.forest_counts)
        self.add_gate('small', self.cayley)
        self.add_gate('small', self.formula_oracle)
        self.add_gate('small', self.g_normalization)
        self.add_gate('small', self.g_decay)
        self.add_gate('small', self.alpha_calculus)
        self.add_gate('small', self.sampler_exactness)
        self.add_gate('small', self.kernel_matches_graph_chain)

        self.add_gate('medium', self.britikov_trend)
        self.add_gate('medium', self.acyclic_asymptotic)
        self.add_gate('medium', self.uniform_trees)
        self.add_gate('medium', self.sequential_addition)
        self.add_gate('medium', self.almost_monotone)
        self.add_gate('medium', self.embedding)
        self.add_gate('medium', self.galton_watson_bound)
        self.add_gate('medium', self.dt_refinement)

        self.add_gate('large', self.drift_convergence)
        self.add_gate('large', self.scaling_limit)
        self.add_gate('large', self.l2_boundedness)

    def add_gate(self, tier: str, gate: Callable[[], GateResult]):
        self.gates[tier].append(gate)

    def run(self, tier: str) -> List[GateResult]:
        if tier not in TIERS:
            raise DomainError(f'tier must be one of {TIERS}, got {tier}')
        results = []
        for gate in self.gates[tier]:
            self.logger.info(f'Running gate {gate.__name__}')
            try:
                result = gate()
            except CritForestError as e:
                self.logger.error(f'Gate {gate.__name__} raised {e.__class__.__name__}: {e}')
                result = GateResult(gate.__name__, float('nan'), 'no error', False,
                                    {'error': e.__class__.__name__, 'message': str(e)})
            self.logger.info(f'{result.name}: statistic {result.statistic:.6g}, gate {result.gate}, '
                             f'{"passed" if result.passed else "FAILED"}')
            results.append(result)
        return results

    def rng(self, stream: int) -> np.random.Generator:
        return child_rng(self.seed, stream)

    # small tier

    def forest_counts(self) -> GateResult:
        table = LogCountTable(6)
        gaps = []
        for N in range(1, 7):
            for m, count in enumeration.forest_counts(N).items():
                gaps.append(abs(round(math.exp(table.entry(N, m))) - count))
        return GateResult('forest_counts', float(max(gaps)), '== 0', max(gaps) == 0, {'entries': len(gaps)})

    def cayley(self) -> GateResult:
        table = LogCountTable(12)
        errors = [abs(math.expm1(table.entry(N, N - 1) - (N - 2) * math.log(N))) for N in range(2, 13)]
        return GateResult('cayley', max(errors), '< 1e-10', max(errors) < 1e-10)

    def formula_oracle(self) -> GateResult:
        table = LogCountTable(6)
        gap = 0.0
        for p in (0.1, 0.3, 0.5):
            for N in (5, 6):
                gap = max(gap, abs(acyclic_prob_exact(table, N, p) - float(enumeration.acyclic_probability(N, p))))
            for r in range(1, 6):
                for k in range(r, 6):
                    exact = float(enumeration.stack_forest_probability(5, r, k, p))
                    gap = max(gap, abs(stack_forest_event_prob(table, 5, r, k, p) - exact))
        return GateResult('formula_oracle', gap, '<= 1e-12', gap <= 1e-12)

    def g_normalization(self) -> GateResult:
        cfg = QuadratureConfig()
        total = integrate_g(-60.0, 60.0, cfg) + RIGHT_TAIL_CONSTANT * (2 / 3) * 60.0 ** -1.5
        return GateResult('g_normalization', abs(total - 1), '<= 1e-4', abs(total - 1) <= 1e-4, {'integral': total})

    def g_decay(self) -> GateResult:
        left, right = eval_g(-50.0), eval_g(50.0)
        relative = abs(right / right_tail(50.0) - 1)
        passed = left <= 1e-6 and relative <= 0.01 and eval_g(0.0) > 0
        return GateResult('g_decay', relative, 'g(-50) <= 1e-6 and |g(50)/tail - 1| <= 0.01', passed,
                          {'g(-50)': left, 'g(50)': right})

    def alpha_calculus(self) -> GateResult:
        cfg = DriftEvalConfig()
        bs = np.arange(1, 51) / 10
        monotone, small, worst = True, True, 0.0
        for lam in (-2.0, 0.0, 2.0):
            values = [eval_alpha(b, lam, cfg) for b in bs]
            monotone &= bool(np.all(np.diff(values) > 0))
            small &= eval_alpha(0.01, lam, cfg) < 0.05
            for b in (0.5, 1.0, 2.0):
                h = 1e-4 * b
                difference = (eval_alpha(b + h, lam, cfg) - eval_alpha(b - h, lam, cfg)) / (2 * h)
                worst = max(worst, abs(difference / alpha_partial_b(b, lam, cfg) - 1))
                j_difference = (eval_J(1, b + h, lam, cfg) - eval_J(1, b - h, lam, cfg)) / (2 * h)
                worst = max(worst, abs(j_difference / (-b * eval_J(3, b, lam, cfg)) - 1))
        passed = monotone and small and worst <= 1e-4
        return GateResult('alpha_calculus', worst, 'monotone, alpha(0.01) < 0.05, derivatives within 1e-4', passed,
                          {'monotone': monotone, 'small_near_zero': small})

    def sampler_exactness(self) -> GateResult:
        table = LogCountTable(5)
        forests = enumeration.forests_with_edges(5, 3)
        draws = 50 * len(forests)
        samples = {}
        for offset, strategy in enumerate((EXACT, REJECTION)):
            rng = self.rng(100 + offset)
            samples[strategy] = [sample_forest_nm(table, 5, 3, rng, strategy).key() for _ in range(draws)]
        pvalues = [chi_square_uniform(samples[strategy], forests)[1] for strategy in (EXACT, REJECTION)]
        pvalues.append(chi_square_two_sample(samples[EXACT], samples[REJECTION])[1])
        return GateResult('sampler_exactness', min(pvalues), 'p > 0.01', min(pvalues) > 0.01,
                          {'exact': pvalues[0], 'rejection': pvalues[1], 'two_sample': pvalues[2]})

    def kernel_matches_graph_chain(self, draws: int = 20000, p: float = 0.3) -> GateResult:
        N = 6
        table = LogCountTable(N)
        rng = self.rng(200)
        graph_paths = [tuple(explore(sample_forest_np(table, N, p, rng, EXACT)).stack_sizes[1:].tolist())
                       for _ in range(draws)]
        kernel_paths = simulate_kernel_ensemble(kernel_for(table, N, p), N, draws, self.seed + 201)
        _, pvalue = chi_square_two_sample(graph_paths, [tuple(row) for row in kernel_paths[:, 1:].tolist()])
        return GateResult('kernel_matches_graph_chain', pvalue, 'p > 0.01', pvalue > 0.01, {'draws': draws})

    # medium tier

    def britikov_trend(self) -> GateResult:
        g = g_evaluator()
        gaps = [abs(britikov_ratio(None, N, math.ceil(N / 2), g) - 1) for N in (200, 800, 3200)]
        passed = gaps[0] > gaps[1] > gaps[2] and gaps[2] <= 0.05
        return GateResult('britikov_trend', gaps[2], 'decreasing and <= 0.05 at N=3200', passed, {'gaps': gaps})

    def acyclic_asymptotic(self) -> GateResult:
        N, p = 2000, critical_p(2000, 0.0)
        gap = abs(acyclic_prob_exact(None, N, p) / acyclic_prob_asymptotic(N, p, g_evaluator()) - 1)
        return GateResult('acyclic_asymptotic', gap, '<= 0.10', gap <= 0.10)

    def uniform_trees(self) -> GateResult:
        check = uniform_tree_check(10 ** 4, 2000, self.seed + 300, runner=self.runner)
        return GateResult('uniform_trees', check.distance, '<= 0.08', check.distance <= 0.08)

    def sequential_addition(self) -> GateResult:
        check = sequential_check(1000, 500, 10, 1000, self.seed + 400, runner=self.runner)
        return GateResult('sequential_addition', check.frequency, f'<= bound {check.mean_bound:.4g} + 3 SE',
                          check.holds, {'failures': check.failures, 'trials': check.trials})

    def almost_monotone(self) -> GateResult:
        rate = monotone_rate(10 ** 4, 5000, 200, self.seed + 500, runner=self.runner)
        return GateResult('almost_monotone', rate.rate, 'monotone chains verified edge by edge',
                          rate.chains_verified,
                          {'in_window': rate.in_window, 'trials': rate.trials, 'mean_cycle_bound': rate.mean_bound})

    def embedding(self, N: int = 10 ** 4, replicas: int = 200) -> GateResult:
        results = self.runner.map(_embedding_task, replicas, N, critical_p(N, 0.0), self.seed + 600,
                                  desc='embeddings')
        contained = sum(inside for _, _, inside in results)
        majorised = sum(weak_majorises(graph, forest) for forest, graph, _ in results)
        return GateResult('embedding', contained / replicas, '== 1 with G majorising F',
                          contained == replicas and majorised == replicas, {'majorised': majorised})

    def galton_watson_bound(self) -> GateResult:
        N, p = 10 ** 4, 0.9 / 10 ** 4
        mean, se = uniform_vertex_component_mean(N, p, 2000, self.seed + 700, runner=self.runner)
        bound = 1.1 * galton_watson_mean_bound(N, p)
        return GateResult('galton_watson_bound', mean, f'<= {bound:.4g}', mean <= bound, {'se': se})

    def dt_refinement(self, replicas: int = 2000) -> GateResult:
        seed = self.seed + 800
        coarse = simulate_ensemble(0.0, 5.0, 1e-3, replicas, seed, chunk=500, substeps=4, progress=self.progress)
        fine = simulate_ensemble(0.0, 5.0, 2.5e-4, replicas, seed, chunk=2000, progress=self.progress)
        distance = ks_distance(coarse.ranked(1, include_open=True), fine.ranked(1, include_open=True))
        return GateResult('dt_refinement', distance, '<= 0.03', distance <= 0.03)

    # large tier

    def drift_convergence(self, N: int = 10 ** 5, replicas: int = 5000) -> GateResult:
        p = critical_p(N, 0.0)
        horizon = int(2 * N ** (2 / 3))
        kernel = kernel_for(None, N, p)
        prefixes = simulate_kernel_ensemble(kernel, horizon, replicas, self.seed + 900, progress=self.progress)
        records = empirical_increment_stats(prefixes, N, p, np.linspace(0, 2, 5), [0, 0.5, 1, 1.5, 2, 3],
                                            alpha=default_alpha_table())
        checks = {'drift': [], 'second_moment': []}
        for record in records:
            if record.kind in checks:
                verdict = record.within(3.0, min_count=500)
                if verdict is not None:
                    checks[record.kind].append(verdict)
        jumps = sum(record.mean * record.count for record in records if record.kind == 'jump' and not record.empty)
        stickiness = [record.mean for record in records if record.kind == 'stickiness' and not record.empty]
        worst_sticky = min(stickiness) if stickiness else float('nan')
        passed = (all(checks['drift']) and all(checks['second_moment']) and jumps == 0
                  and not worst_sticky < 0.4)
        return GateResult('drift_convergence', worst_sticky, 'bins within 3 SE, no jumps, stickiness >= 0.4', passed,
                          {'drift_bins': len(checks['drift']), 'drift_failures': checks['drift'].count(False),
                           'variance_bins': len(checks['second_moment']),
                           'variance_failures': checks['second_moment'].count(False), 'jumps': jumps})

    def scaling_limit(self, N: int = 10 ** 5, replicas: int = 2000) -> GateResult:
        forests = forest_size_sample(N, replicas, self.seed + 1000, m=N // 2, runner=self.runner)
        diffusion = simulate_ensemble(0.0, 10.0, 1e-3, replicas, self.seed + 1001, progress=self.progress)
        distances = [ks_distance(forests.rank(rank), diffusion.ranked(rank, include_open=True)) for rank in (1, 2)]
        return GateResult('scaling_limit', max(distances), '<= 0.05', max(distances) <= 0.05,
                          {'rank_1': distances[0], 'rank_2': distances[1]})

    def l2_boundedness(self, replicas: int = 500) -> GateResult:
        means = []
        for offset, N in enumerate((10 ** 3, 10 ** 4, 10 ** 5)):
            sample: SizeSample = forest_size_sample(N, replicas, self.seed + 1100 + offset, p=critical_p(N, 0.0),
                                                    runner=self.runner)
            means.append(float(np.mean([np.sum(replica ** 2) for replica in sample.replicas])))
        spread = max(means) / min(means)
        return GateResult('l2_boundedness', spread, '<= 2', spread <= 2, {'means': means})
