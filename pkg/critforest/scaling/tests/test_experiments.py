import numpy as np
import pytest

from critforest.scaling.analysis import galton_watson_mean_bound
from critforest.scaling.ensemble import EnsembleRunner
from critforest.scaling.errors import DomainError
from critforest.scaling.experiments import (
    domination_search, forest_size_sample, monotone_rate, sequential_check, uniform_tree_check,
    uniform_vertex_component_mean,
)


def test_forest_size_sample(small_table):
    sample = forest_size_sample(12, 20, seed=1, m=6, table=small_table)
    assert len(sample) == 20
    for replica in sample.replicas:
        assert replica.sum() * 12 ** (2 / 3) == pytest.approx(12)
        assert len(replica) == 6
    with pytest.raises(DomainError):
        forest_size_sample(12, 2, seed=1, m=6, p=0.1)


def test_forest_size_sample_does_not_depend_on_workers():
    one = forest_size_sample(40, 6, seed=2, p=0.025, runner=EnsembleRunner(threads=1))
    two = forest_size_sample(40, 6, seed=2, p=0.025, runner=EnsembleRunner(threads=2))
    assert all(np.array_equal(a, b) for a, b in zip(one.replicas, two.replicas))


def test_uniform_tree_check():
    check = uniform_tree_check(30, 40, seed=3, steps=500)
    assert check.tree_maxima.shape == (40,) and check.excursion_maxima.shape == (40,)
    assert np.all(check.tree_maxima > 0)
    assert 0 <= check.distance <= 1
    with pytest.raises(DomainError):
        uniform_tree_check(1, 10, seed=3)


def test_monotone_rate():
    rate = monotone_rate(200, 100, 4, seed=4)
    assert rate.trials == 4
    assert 0 <= rate.rate <= 1
    assert rate.monotone <= rate.in_window
    assert rate.chains_verified


def test_sequential_check():
    check = sequential_check(100, 30, 2, 60, seed=5)
    assert 0 <= check.frequency <= 1
    assert check.standard_error > 0
    assert check.holds


def test_uniform_vertex_component_mean():
    mean, se = uniform_vertex_component_mean(100, 0.005, 200, seed=6)
    assert 1 <= mean <= galton_watson_mean_bound(100, 0.005) + 3 * se


def test_domination_search():
    report = domination_search(4, 0.1, 0.5)
    assert report.events == 37 + 3
    assert not [finding for finding in report.findings if finding.event.startswith('at least')]
    assert all(finding.gap > 0 for finding in report.findings)
    assert report.to_dict()['events'] == 40
    with pytest.raises(DomainError):
        domination_search(4, 0.5, 0.1)
