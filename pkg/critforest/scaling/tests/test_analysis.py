import numpy as np
import pytest
from pytest import approx
from scipy import stats

from critforest.scaling.analysis import (
    SizeSample, chi_square_two_sample, chi_square_uniform, component_spectrum, galton_watson_mean_bound, ks_distance,
    ks_permutation_threshold, ks_test, l2_tail, mean_component_size_of_uniform_vertex,
    size_of_uniform_vertex_component, tail_concatenation_check, weak_majorises,
)
from critforest.scaling.errors import BoundUndefinedError, DomainError, ValidationError
from critforest.scaling.graphs import Graph


def test_size_sample_padding():
    sample = SizeSample([[3, 1], [2], []])
    assert sample.padded(3).tolist() == [[3, 1, 0], [2, 0, 0], [0, 0, 0]]
    assert sample.rank(2).tolist() == [1, 0, 0]
    assert SizeSample.from_unsorted([[1, 4, 2]], scale=0.5).replicas[0].tolist() == [2.0, 1.0, 0.5]
    with pytest.raises(ValidationError):
        SizeSample([[1, 2]])


def test_ks_distance():
    assert ks_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert ks_distance([0, 0], [1, 1]) == 1.0
    statistic, pvalue = ks_test(np.arange(50), np.arange(50) + 100)
    assert statistic == 1.0 and pvalue < 1e-10
    with pytest.raises(DomainError):
        ks_distance([], [1])


def test_permutation_threshold(rng):
    a, b = rng.normal(size=200), rng.normal(size=200)
    threshold = ks_permutation_threshold(a, b, permutations=300, rng=rng)
    # two-sample 99% critical value is about 1.63 sqrt(2/200)
    assert 0.1 < threshold < 0.25


def test_weak_majorisation():
    assert weak_majorises([3, 1], [2, 2])
    assert not weak_majorises([2, 2], [3, 1])
    assert weak_majorises([4], [1, 1, 1])
    assert weak_majorises([], [])


def test_l2_tail():
    assert l2_tail([1, 3, 2], 1) == 5.0
    assert l2_tail([1, 3, 2], 5) == 0.0
    with pytest.raises(DomainError):
        l2_tail([1], -1)


def test_tail_concatenation():
    blocks = [[3.0, 1.0], [2.0, 2.0], [0.5]]
    check = tail_concatenation_check(blocks, 1, 0.5)
    assert check.tail == approx(4.0 + 1.0 + 0.25)
    assert check.bound == approx(0.5 * 16 + 16 + 0.25)
    assert check.holds
    with pytest.raises(DomainError):
        tail_concatenation_check(blocks, 0, 0.5)


def test_component_spectrum():
    rows = component_spectrum(SizeSample([[4, 2], [2, 2], [6]]), 2)
    assert [row.rank for row in rows] == [1, 2]
    assert rows[0].mean == approx(4.0)
    assert rows[1].median == 2.0
    assert len(rows[0].deciles) == 9
    assert rows[0].to_dict()['deciles'] == list(rows[0].deciles)


def test_chi_square():
    statistic, pvalue = chi_square_uniform(['a'] * 10 + ['b'] * 10, ['a', 'b'])
    assert statistic == 0.0 and pvalue == approx(1.0)
    with pytest.raises(ValidationError):
        chi_square_uniform(['c'], ['a', 'b'])
    _, pvalue = chi_square_two_sample(['a'] * 50 + ['b'] * 50, ['a'] * 50 + ['b'] * 50)
    assert pvalue == approx(1.0)
    _, pvalue = chi_square_two_sample(['a'] * 100, ['b'] * 100)
    assert pvalue < 1e-10


def test_two_sample_pools_rare_categories():
    left = ['a'] * 40 + ['b'] * 40 + ['c'] * 2
    right = ['a'] * 40 + ['b'] * 40 + ['d']
    # c and d expect under 5 per sample and are pooled with a, the next rarest
    statistic, pvalue, _, _ = stats.chi2_contingency(np.array([[42, 40], [41, 40]]))
    assert chi_square_two_sample(left, right) == approx((statistic, pvalue))
    assert chi_square_two_sample(['a'] * 3, ['a'] * 2) == (0.0, 1.0)
    assert chi_square_two_sample(['a', 'b', 'c'], ['d', 'e']) == (0.0, 1.0)


def test_galton_watson_bound():
    assert galton_watson_mean_bound(100, 0.005) == approx(2.0)
    with pytest.raises(BoundUndefinedError):
        galton_watson_mean_bound(100, 0.01)


def test_uniform_vertex_component(rng):
    graph = Graph(4, [(0, 1), (1, 2)])
    sizes = {size_of_uniform_vertex_component(graph, rng) for _ in range(100)}
    assert sizes == {1, 3}
    mean, se = mean_component_size_of_uniform_vertex([Graph(3, [(0, 1), (1, 2)])] * 5, rng)
    assert mean == 3.0 and se == 0.0
    with pytest.raises(DomainError):
        mean_component_size_of_uniform_vertex([], rng)
