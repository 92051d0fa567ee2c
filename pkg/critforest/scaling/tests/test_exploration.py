from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest
from pytest import approx

from critforest.scaling import enumeration
from critforest.scaling.combinatorics import critical_p
from critforest.scaling.errors import DomainError, ValidationError
from critforest.scaling.exploration import (
    BinRecord, ExplorationTrace, TransitionKernel, component_sizes_via_exploration, empirical_increment_stats,
    excursion_lengths, explore, kernel_for, prefix_excursion_lengths, rescale_trace, simulate_kernel_chain,
    simulate_kernel_ensemble,
)
from critforest.scaling.graphs import Graph
from critforest.scaling.samplers import sample_gnp


def test_explore_small_graph():
    trace = explore(Graph(5, [(0, 2), (2, 4), (1, 3)]))
    assert trace.order.tolist() == [0, 2, 4, 1, 3]
    assert trace.stack_sizes.tolist() == [0, 1, 1, 0, 1, 0]
    assert excursion_lengths(trace).tolist() == [3, 2]


def test_exploration_finds_components(rng):
    for _ in range(10):
        graph = sample_gnp(60, 0.03, rng)
        assert component_sizes_via_exploration(graph).tolist() == graph.component_sizes().tolist()


def test_trace_validation():
    with pytest.raises(ValidationError):
        ExplorationTrace(2, None, np.array([0, 1])).validate()
    with pytest.raises(ValidationError):
        ExplorationTrace(2, None, np.array([0, 2, 0])).validate()
    with pytest.raises(ValidationError):
        ExplorationTrace(2, np.array([0, 0]), np.array([0, 1, 0])).validate()


def test_prefix_excursions():
    assert prefix_excursion_lengths([0, 1, 0, 2, 1, 0, 1]).tolist() == [3, 2]
    assert prefix_excursion_lengths([0, 1, 2]).tolist() == []


def test_rows_are_distributions(small_table):
    kernel = TransitionKernel(small_table, 12, 0.2)
    for n, r in [(0, 0), (0, 3), (4, 2), (10, 1), (11, 0)]:
        row = kernel.row(n, r)
        assert row.probs.sum() == approx(1.0)
        assert row.support.min() >= (0 if r == 0 else -1)
        assert row.cdf[-1] == 1.0
    assert kernel.row(4, 2) is kernel.row(4, 2)
    with pytest.raises(DomainError):
        kernel.row(12, 0)
    with pytest.raises(DomainError):
        kernel.row(3, 10)


def test_kernel_path_law_is_exact(small_table):
    """Every stack-size path of F(5, p) has the probability the kernel assigns to it"""
    N, p = 5, Fraction(1, 4)
    law = defaultdict(Fraction)
    for forest in enumeration.all_forests(N):
        path = tuple(explore(Graph(N, list(forest))).stack_sizes.tolist())
        law[path] += p ** len(forest) * (1 - p) ** (10 - len(forest))
    total = sum(law.values())

    kernel = TransitionKernel(small_table, N, float(p))
    for path, weight in law.items():
        probability = 1.0
        for n in range(N):
            row = kernel.row(n, path[n])
            matches = np.flatnonzero(row.support == path[n + 1] - path[n])
            probability *= float(row.probs[matches[0]]) if len(matches) else 0.0
        assert probability == approx(float(weight / total), abs=1e-12)


def test_kernel_without_table_agrees(small_table):
    with_table = TransitionKernel(small_table, 12, 0.15)
    without = TransitionKernel(None, 12, 0.15)
    for n, r in [(0, 0), (2, 3), (7, 1)]:
        assert np.allclose(with_table.row(n, r).probs, without.row(n, r).probs, atol=1e-12)


def test_chain_paths_are_valid(rng):
    N = 200
    Z = simulate_kernel_chain(None, N, critical_p(N, 0.0), N, rng)
    ExplorationTrace(N, None, Z).validate()


def test_ensemble_replicas_are_independent():
    kernel = TransitionKernel(None, 80, critical_p(80, 0.5))
    many = simulate_kernel_ensemble(kernel, 40, 3, seed=7)
    single = simulate_kernel_ensemble(TransitionKernel(None, 80, critical_p(80, 0.5)), 40, 1, seed=7)
    assert many.shape == (3, 41)
    assert np.array_equal(many[0], single[0])


def test_rescaled_path():
    path = rescale_trace([0, 1, 2, 1, 0, 0, 1, 0, 0], 8)
    assert path.horizon == approx(2.0)
    assert path(0.5) == approx(2 * 0.5)
    assert path.sup() == approx(1.0)
    with pytest.raises(DomainError):
        path(2.5)


def test_increment_stats_layout():
    prefixes = np.array([[0, 1, 2, 1, 0, 1, 0, 0, 0], [0, 1, 0, 1, 2, 3, 2, 1, 0]])
    records = empirical_increment_stats(prefixes, 8, critical_p(8, 0.0), [0.0, 1.0, 2.0], [0.0, 1.0, 5.0],
                                        alpha=lambda b, lam: np.zeros_like(b))
    assert len(records) == 2 * (2 * 2 + 2)
    kinds = {record.kind for record in records}
    assert kinds == {'drift', 'second_moment', 'jump', 'stickiness'}
    assert all(isinstance(record.to_dict()['t_range'], list) for record in records)


def test_bin_record_within():
    record = BinRecord('drift', (0, 1), (0, 1), 10, 1.0, 0.1, 1.25)
    assert record.within(3.0)
    assert not record.within(2.0)
    assert record.within(min_count=20) is None
    assert BinRecord('drift', (0, 1), (0, 1), 0, float('nan'), float('nan'), float('nan')).empty


def test_kernel_cache_is_shared_and_bounded():
    kernel_for.cache_clear()
    kernel = kernel_for(None, 8, 0.2)
    assert kernel_for(None, 8, 0.2) is kernel
    for step in range(20):
        kernel_for(None, 8, 0.3 + 0.01 * step)
    info = kernel_for.cache_info()
    assert info.maxsize == 8
    assert info.currsize == 8
    assert kernel_for(None, 8, 0.2) is not kernel
