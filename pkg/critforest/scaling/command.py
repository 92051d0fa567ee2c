import logging
import math
import sys
from pathlib import Path

import numpy as np

from critforest.scaling import settings
from critforest.scaling.analysis import SizeSample, component_spectrum, ks_distance, ks_permutation_threshold
from critforest.scaling.artifacts.forest_format import ForestFormat, read_forests, write_forests_text
from critforest.scaling.artifacts.manifest import Manifest
from critforest.scaling.artifacts.path_format import PathFormat
from critforest.scaling.artifacts.tabular import read_json, write_csv, write_json
from critforest.scaling.combinatorics import (
    LogCountTable, acyclic_prob_asymptotic, acyclic_prob_exact, britikov_asymptotic, critical_p,
    forest_count_log_any,
)
from critforest.scaling.config import ExperimentConfig
from critforest.scaling.diffusion import DiffusionPath, simulate_ensemble
from critforest.scaling.drift import AlphaTable, DriftEvalConfig, alpha_partial_b, eval_alpha
from critforest.scaling.ensemble import EnsembleRunner
from critforest.scaling.errors import ConfigError, ValidationError
from critforest.scaling.experiments import domination_search, uniform_tree_check
from critforest.scaling.exploration import (
    empirical_increment_stats, explore, kernel_for, prefix_excursion_lengths, simulate_kernel_ensemble,
)
from critforest.scaling.runner import EXIT_GATES_FAILED, EXIT_OK
from critforest.scaling.samplers import EXACT, REJECTION, STRATEGIES, sample_forest_nm, sample_forest_np
from critforest.scaling.stable_density import eval_g_array, g_evaluator
from critforest.scaling.utils import child_rng
from critforest.scaling.verify import TIERS, Verifier

# The exact count table is cubic to build; above this size oracles use the integer formula and samplers rejection
EXACT_TABLE_LIMIT = 400


def _grid(text: str, name: str) -> np.ndarray:
    """lo:hi:step, inclusive of hi"""
    try:
        lo, hi, step = (float(part) for part in text.split(':'))
    except ValueError:
        raise ConfigError(f'{name} must look like lo:hi:step, got {text!r}')
    if step <= 0 or hi < lo:
        raise ConfigError(f'{name} needs lo <= hi and step > 0, got {text!r}')
    return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)


def _n(flags=('--n',), **kwargs):
    return flags, dict(dest='N', type=int, **kwargs)


def _seed():
    return ('--seed',), dict(type=int, help='root seed, replica i uses stream (seed, i)')


def _out(help='output file, stdout when omitted'):
    return ('--out',), dict(help=help)


class Command:
    def __init__(self, main_runner):
        self.logger = logging.getLogger(self.__class__.__name__)

        main_runner.add_command('oracle', self.oracle, 'exact forest counts against the asymptotic estimate', [
            _n(nargs='+', help='vertex counts'),
            (('--m',), dict(type=int, help='edge count, ceil(N/2) when omitted')),
            (('--acyclic',), dict(action='store_true', default=None, help='acyclicity probability of G(N, p)')),
            (('--p',), dict(type=float)),
            (('--lambda',), dict(dest='lam', type=float, help='critical p = (1 + lambda N^{-1/3}) / N')),
            _out(),
        ])
        main_runner.add_command('eval-g', self.eval_g, 'the stable density g on a grid', [
            (('--from',), dict(dest='x_from', type=float)),
            (('--to',), dict(dest='x_to', type=float)),
            (('--step',), dict(type=float)),
            _out(),
        ])
        main_runner.add_command('eval-alpha', self.eval_alpha, 'alpha(b, lambda) and its b-derivative on a grid', [
            (('--b-grid',), dict(help='lo:hi:step')),
            (('--lambda-grid',), dict(help='lo:hi:step')),
            (('--table',), dict(dest='table_out', help='also store an interpolation table for this grid')),
            _out(),
        ])
        main_runner.add_command('sample-forest', self.sample_forest, 'uniform forests F(N, m) or F(N, p)', [
            _n(), (('--m',), dict(type=int)), (('--p',), dict(type=float)),
            (('--count',), dict(type=int)), _seed(),
            (('--strategy',), dict(choices=STRATEGIES)),
            (('--format',), dict(choices=('text', 'binary'))),
            _out(),
        ])
        main_runner.add_command('explore', self.explore, 'breadth-first stack sizes of stored forests', [
            (('--in',), dict(dest='input', help='forest file, text or binary')),
            _out(),
        ])
        main_runner.add_command('simulate-kernel', self.simulate_kernel, 'the stack-size chain of F(N, p)', [
            _n(), (('--lambda',), dict(dest='lam', type=float)),
            (('--horizon-t',), dict(type=float, help='rescaled time horizon')),
            (('--replicas',), dict(type=int)), _seed(),
            (('--time-bins',), dict(type=float, nargs='+')),
            (('--height-bins',), dict(type=float, nargs='+')),
            _out(),
        ])
        main_runner.add_command('simulate-diffusion', self.simulate_diffusion, 'the reflected diffusion Z or B', [
            (('--lambda',), dict(dest='lam', type=float)),
            (('--T',), dict(type=float)), (('--dt',), dict(type=float)),
            (('--replicas',), dict(type=int)), _seed(),
            (('--kind',), dict(choices=('Z', 'B'))),
            (('--paths-out',), dict(help='binary file for the raw paths')),
            _out(),
        ])
        main_runner.add_command('compare', self.compare, 'two size or excursion-length samples', [
            (('--left',), dict()), (('--right',), dict()),
            (('--stat',), dict(choices=('ks', 'spectrum'))),
            (('--rank',), dict(type=int, nargs='+', help='ranks to compare, 1 2 when omitted')),
            (('--gate',), dict(type=float, help='KS gate; permutation 99%% threshold when omitted')),
            _seed(), _out(),
        ])
        main_runner.add_command('verify', self.verify, 'acceptance gates of a scale tier', [
            (('--tier',), dict(choices=TIERS)), _seed(), _out(),
        ])
        main_runner.add_command('domination-search', self.domination_search,
                                'increasing events favouring the smaller p at small N', [
                                    _n(), (('--p',), dict(type=float)), (('--q',), dict(type=float)), _out(),
                                ])
        main_runner.add_command('uniform-tree-check', self.uniform_tree_check,
                                'exploration maxima of uniform trees against Brownian excursions', [
                                    (('--k',), dict(dest='K', type=int)), (('--count',), dict(type=int)),
                                    _seed(), _out(),
                                ])

    @staticmethod
    def manifest(config: ExperimentConfig) -> Manifest:
        return Manifest.for_config(config.to_dict(), config.seed, config.command)

    @staticmethod
    def runner(config: ExperimentConfig) -> EnsembleRunner:
        return EnsembleRunner(config.threads, progress=not config.quiet and sys.stderr.isatty())

    @staticmethod
    def emit(config: ExperimentConfig, text: str):
        if config.out is None:
            sys.stdout.write(text)

    def write_csv(self, config: ExperimentConfig, columns, rows):
        self.emit(config, write_csv(config.out, columns, rows, self.manifest(config)))

    def write_json(self, config: ExperimentConfig, document: dict):
        self.emit(config, write_json(config.out, document, self.manifest(config)))

    def oracle(self, config: ExperimentConfig) -> int:
        config.require('N')
        g = g_evaluator()
        largest = max(config.N)
        table = LogCountTable(largest) if largest <= EXACT_TABLE_LIMIT else None
        if config.acyclic:
            rows = []
            for N in config.N:
                p = config.p if config.p is not None else critical_p(N, config.lam or 0.0)
                rows.append((N, p, acyclic_prob_exact(table, N, p), acyclic_prob_asymptotic(N, p, g)))
            self.write_csv(config, ('N', 'p', 'exact', 'asymptotic'), rows)
            return EXIT_OK
        rows = []
        for N in config.N:
            m = config.m if config.m is not None else math.ceil(N / 2)
            exact = forest_count_log_any(table, N, m)
            asymptotic = britikov_asymptotic(N, m, g).log_value
            rows.append((N, m, exact, asymptotic, math.exp(exact - asymptotic)))
        self.write_csv(config, ('N', 'm', 'exact_log_count', 'britikov_log', 'ratio'), rows)
        return EXIT_OK

    def eval_g(self, config: ExperimentConfig) -> int:
        config.require('x_from', 'x_to', 'step')
        xs = _grid(f'{config.x_from}:{config.x_to}:{config.step}', 'grid')
        self.write_csv(config, ('x', 'g'), zip(xs.tolist(), eval_g_array(xs).tolist()))
        return EXIT_OK

    def eval_alpha(self, config: ExperimentConfig) -> int:
        config.require('b_grid', 'lambda_grid')
        bs, lambdas = _grid(config.b_grid, '--b-grid'), _grid(config.lambda_grid, '--lambda-grid')
        cfg = DriftEvalConfig()
        rows = []
        for b in bs.tolist():
            for lam in lambdas.tolist():
                if b <= 0:
                    rows.append((b, lam, 0.0, float('nan')))
                else:
                    rows.append((b, lam, eval_alpha(b, lam, cfg), alpha_partial_b(b, lam, cfg)))
        if config.table_out:
            if bs[0] != 0:
                raise ConfigError('an alpha table must start at b = 0')
            values = np.array([alpha for _, _, alpha, _ in rows]).reshape(len(bs), len(lambdas))
            AlphaTable(bs, lambdas, values).save(Path(config.table_out), manifest=self.manifest(config).to_dict())
            self.logger.info(f'Alpha table written to {config.table_out}')
        self.write_csv(config, ('b', 'lambda', 'alpha', 'dalpha_db'), rows)
        return EXIT_OK

    def sample_forest(self, config: ExperimentConfig) -> int:
        N = config.single_N
        count = config.count or 1
        wants_table = N <= EXACT_TABLE_LIMIT or config.strategy == EXACT
        table = LogCountTable(N) if wants_table and config.strategy != REJECTION else None
        forests = []
        for index in range(count):
            rng = child_rng(config.seed, index)
            if config.m is not None:
                forests.append(sample_forest_nm(table, N, config.m, rng, config.strategy))
            else:
                forests.append(sample_forest_np(table, N, config.p, rng, config.strategy))
        manifest = self.manifest(config).to_dict()
        if config.format == 'binary':
            if config.out is None:
                raise ConfigError('binary output needs --out')
            ForestFormat().write(Path(config.out), forests, manifest=manifest)
        else:
            self.emit(config, write_forests_text(config.out, forests, manifest))
        return EXIT_OK

    def explore(self, config: ExperimentConfig) -> int:
        config.require('input')
        rows = []
        for index, forest in enumerate(read_forests(Path(config.input))):
            for n, size in enumerate(explore(forest).stack_sizes.tolist()):
                rows.append((index, n, size))
        self.write_csv(config, ('forest', 'n', 'Z'), rows)
        return EXIT_OK

    def simulate_kernel(self, config: ExperimentConfig) -> int:
        N = config.single_N
        config.require('horizon_t', 'replicas')
        p = critical_p(N, config.lam or 0.0)
        horizon = min(N, int(config.horizon_t * N ** (2 / 3)))
        kernel = kernel_for(None, N, p)
        prefixes = simulate_kernel_ensemble(kernel, horizon, config.replicas, config.seed,
                                            progress=not config.quiet and sys.stderr.isatty())
        scale = N ** (-2 / 3)
        document = {
            'N': N, 'p': p, 'lambda': kernel.Lambda, 'horizon': horizon,
            'replicas': [(prefix_excursion_lengths(prefix) * scale).tolist() for prefix in prefixes],
        }
        if config.time_bins and config.height_bins:
            records = empirical_increment_stats(prefixes, N, p, config.time_bins, config.height_bins)
            document['bins'] = [record.to_dict() for record in records]
        self.write_json(config, document)
        return EXIT_OK

    def simulate_diffusion(self, config: ExperimentConfig) -> int:
        config.require('T', 'replicas')
        lam = config.lam or 0.0
        dt = config.dt or settings.DEFAULT_DT
        result = simulate_ensemble(lam, config.T, dt, config.replicas, config.seed, kind=config.kind,
                                   store_paths=config.paths_out is not None,
                                   progress=not config.quiet and sys.stderr.isatty())
        document = {
            'lambda': lam, 'T': result.horizon, 'dt': dt, 'kind': config.kind,
            'replicas': [result.sorted_lengths(index, include_open=True).tolist()
                         for index in range(config.replicas)],
            'time_at_zero': result.time_at_zero.tolist(),
        }
        if config.paths_out:
            paths = [DiffusionPath(lam, dt, values, np.zeros(len(values) - 1), config.kind)
                     for values in result.paths]
            PathFormat().write(Path(config.paths_out), paths, manifest=self.manifest(config).to_dict())
        self.write_json(config, document)
        return EXIT_OK

    @staticmethod
    def load_sample(path: str) -> SizeSample:
        """Rescaled sizes from a forest file, or the `replicas` lists of a JSON document"""
        path = Path(path)
        if path.suffix == '.json':
            document = read_json(path)
            if 'replicas' not in document:
                raise ValidationError(f'{path} has no replicas')
            return SizeSample.from_unsorted(document['replicas'])
        forests = read_forests(path)
        return SizeSample([forest.component_sizes() * forest.n_vertices ** (-2 / 3) for forest in forests],
                          validate=False)

    def compare(self, config: ExperimentConfig) -> int:
        config.require('left', 'right')
        left, right = self.load_sample(config.left), self.load_sample(config.right)
        ranks = config.rank or [1, 2]
        records = []
        if config.stat == 'ks':
            for rank in ranks:
                a, b = left.rank(rank), right.rank(rank)
                gate = config.gate if config.gate is not None else \
                    ks_permutation_threshold(a, b, 0.99, rng=child_rng(config.seed, rank))
                statistic = ks_distance(a, b)
                records.append({'name': f'ks_rank_{rank}', 'statistic': statistic, 'gate': gate,
                                'passed': statistic <= gate})
        else:
            k = max(ranks)
            for row_left, row_right in zip(component_spectrum(left, k), component_spectrum(right, k)):
                se = math.hypot(row_left.se, row_right.se)
                statistic = abs(row_left.mean - row_right.mean) / se if se > 0 else 0.0
                records.append({'name': f'spectrum_rank_{row_left.rank}', 'statistic': statistic, 'gate': 3.0,
                                'passed': statistic <= 3.0, 'left': row_left.to_dict(),
                                'right': row_right.to_dict()})
        self.write_json(config, {'stat': config.stat, 'records': records})
        return EXIT_OK if all(record['passed'] for record in records) else EXIT_GATES_FAILED

    def verify(self, config: ExperimentConfig) -> int:
        verifier = Verifier(config.seed, self.runner(config), progress=not config.quiet and sys.stderr.isatty())
        results = verifier.run(config.tier)
        self.write_json(config, {'tier': config.tier, 'gates': [result.to_dict() for result in results],
                                 'passed': all(result.passed for result in results)})
        return EXIT_OK if all(result.passed for result in results) else EXIT_GATES_FAILED

    def domination_search(self, config: ExperimentConfig) -> int:
        config.require('p', 'q')
        report = domination_search(config.single_N, config.p, config.q)
        self.write_json(config, report.to_dict())
        return EXIT_OK

    def uniform_tree_check(self, config: ExperimentConfig) -> int:
        config.require('K', 'count')
        check = uniform_tree_check(config.K, config.count, config.seed, runner=self.runner(config))
        self.write_json(config, {'K': config.K, 'count': config.count, 'statistic': check.distance,
                                 'gate': 0.08, 'passed': check.distance <= 0.08})
        return EXIT_OK if check.distance <= 0.08 else EXIT_GATES_FAILED
