import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from pytest import approx

from critforest.scaling import enumeration
from critforest.scaling.combinatorics import (
    LogCountTable, ScalingParams, acyclic_log_profile, acyclic_prob_asymptotic, acyclic_prob_exact,
    britikov_asymptotic, britikov_ratio, critical_m, critical_p, expected_stack_forest_exact, forest_count_exact,
    forest_count_log, forest_count_log_any, scaling_params, separation_prob, separation_ratio, stack_forest_asymptotic,
    stack_forest_asymptotic_scaled, stack_forest_event_prob,
)
from critforest.scaling.errors import CapacityError, DomainError
from critforest.scaling.stable_density import eval_g


def test_table_matches_enumeration(small_table):
    for N in range(1, 7):
        for m, count in enumeration.forest_counts(N).items():
            assert round(math.exp(forest_count_log(small_table, N, m))) == count


def test_cayley(small_table):
    for N in range(2, 13):
        assert math.exp(small_table.entry(N, N - 1)) == approx(N ** (N - 2), rel=1e-10)


def test_table_edges(small_table):
    assert forest_count_log(small_table, 3, 2) == approx(math.log(3))
    for N in range(0, 13):
        assert small_table.entry(N, 0) == 0.0
    assert np.all(np.isfinite(small_table.row(12)))
    assert np.all(small_table.row(12) >= 0)


def test_table_errors(small_table):
    with pytest.raises(DomainError):
        forest_count_log(small_table, 4, 4)
    with pytest.raises(CapacityError):
        forest_count_log(small_table, 13, 2)
    with pytest.raises(CapacityError):
        LogCountTable(10, capacity=5)


def test_exact_formula_agrees_with_table(small_table):
    for N in range(1, 13):
        for m in range(N):
            assert math.log(forest_count_exact(N, m)) == approx(small_table.entry(N, m), rel=1e-12, abs=1e-12)
    assert forest_count_exact(10, 9) == 10 ** 8
    assert forest_count_log_any(None, 50, 49) == approx(48 * math.log(50))


def test_britikov_centre():
    g = lambda x: 0.3
    assert britikov_asymptotic(400, 200, g).argument == 0.0
    assert britikov_asymptotic(400, 200, g).in_window


@pytest.mark.slow
def test_britikov_ratio_improves():
    gaps = [abs(britikov_ratio(None, N, N // 2, eval_g) - 1) for N in (200, 3200)]
    assert gaps[1] < gaps[0]
    assert gaps[1] <= 0.05


def test_britikov_off_centre():
    N = 3200
    m = N // 2 + int(N ** (2 / 3) / 2)
    assert britikov_asymptotic(N, m, eval_g).argument == approx(1.0, abs=0.01)
    assert britikov_ratio(None, N, m, eval_g) == approx(1.0, abs=0.1)


@pytest.mark.parametrize('p', [0.1, 0.3, 0.5])
def test_acyclic_probability_against_enumeration(small_table, p):
    for N in (5, 6):
        exact = float(enumeration.acyclic_probability(N, p))
        assert acyclic_prob_exact(small_table, N, p) == approx(exact, abs=1e-12)
        assert acyclic_prob_exact(None, N, p) == approx(exact, abs=1e-12)


def test_acyclic_small_cases(small_table):
    assert acyclic_prob_exact(small_table, 2, 0.7) == 1.0
    assert acyclic_prob_exact(small_table, 3, 0.5) == approx(0.875)
    profile = acyclic_log_profile(6, 0.3)
    assert profile[0] == 0.0 and profile[1] == 0.0
    assert profile[2] == approx(0.0, abs=1e-14)
    assert math.exp(profile[6]) == approx(acyclic_prob_exact(small_table, 6, 0.3), rel=1e-12)


def test_acyclic_asymptotic_scaling():
    g = lambda x: 0.25
    N = 1000
    low, high = acyclic_prob_asymptotic(N, critical_p(N, 0.0), g), \
        acyclic_prob_asymptotic(64 * N, critical_p(64 * N, 0.0), g)
    assert high / low == approx(0.5)


@pytest.mark.slow
def test_acyclic_asymptotic_at_window_centre():
    N = 2000
    p = critical_p(N, 0.0)
    assert acyclic_prob_exact(None, N, p) / acyclic_prob_asymptotic(N, p, eval_g) == approx(1.0, abs=0.10)


@pytest.mark.parametrize('p', [0.1, 0.3, 0.5])
def test_stack_forest_against_enumeration(small_table, p):
    for r in range(1, 6):
        for k in range(r, 6):
            exact = float(enumeration.stack_forest_probability(5, r, k, p))
            assert stack_forest_event_prob(small_table, 5, r, k, p) == approx(exact, abs=1e-12)


def test_stack_forest_isolated_root(small_table):
    N, p = 9, 0.2
    expected = (1 - p) ** (N - 1) * acyclic_prob_exact(small_table, N - 1, p)
    assert stack_forest_event_prob(small_table, N, 1, 1, p) == approx(expected, rel=1e-12)


def test_expected_stack_forest(small_table):
    assert expected_stack_forest_exact(small_table, 7, 7, 0.3) == approx(7)
    weights = {k: float(enumeration.stack_forest_probability(5, 1, k, 0.3)) for k in range(1, 6)}
    expected = sum(k * w for k, w in weights.items()) / sum(weights.values())
    assert expected_stack_forest_exact(small_table, 5, 1, 0.3) == approx(expected, rel=1e-12)


def test_separation(small_table):
    N, p = 6, 0.3
    for r in range(1, N):
        exact = float(enumeration.separated_probability(N, r, p) / enumeration.acyclic_probability(N, p))
        assert separation_prob(small_table, N, r, p) == approx(exact, rel=1e-10)
    for r in range(1, N - 1):
        ratio = separation_prob(small_table, N, r + 1, p) / separation_prob(small_table, N, r, p)
        assert separation_ratio(small_table, N, r, p) == approx(ratio, rel=1e-10)


def test_stack_asymptotic_scaled_form():
    g = lambda x: math.exp(-x * x)
    N, p = 1000, critical_p(1000, 0.5)
    direct = stack_forest_asymptotic(N, 900, 12, 70, p, g)
    assert direct == approx(stack_forest_asymptotic_scaled(N, 0.7, 1.2, 0.5 - 1.0, g), rel=1e-9)
    tiny = stack_forest_asymptotic_scaled(1000, 1e-3, 1.2, 0.0, g)
    assert tiny < 1e-100
    with pytest.raises(DomainError):
        stack_forest_asymptotic(1000, 1000, 10, 0, critical_p(1000, 0.0), g)


def test_scaling_params():
    params = ScalingParams(1000, p=critical_p(1000, 1.5), r=20, k=100, N_prime=900)
    assert params.Lambda == approx(1.5)
    assert params.b == approx(2.0)
    assert params.s == approx(1.0)
    assert scaling_params(1000, Lambda=1.5).p == approx(critical_p(1000, 1.5))
    assert ScalingParams(1000, m=critical_m(1000, 0.0)).Lambda == approx(0.0, abs=0.02)
    with pytest.raises(DomainError):
        ScalingParams(10, r=5, k=3)
    with pytest.raises(DomainError):
        scaling_params(10, p=0.1, m=3)


@pytest.fixture(scope='module')
def goldens():
    return json.loads((Path(__file__).parent / 'fixtures' / 'goldens.json').read_text())


def test_golden_counts(goldens):
    for N, counts in goldens['forest_counts']['values'].items():
        N = int(N)
        assert [forest_count_exact(N, m) for m in range(N)] == counts
        assert [enumeration.forest_counts(N)[m] for m in range(N)] == counts


def test_golden_acyclic(goldens, small_table):
    for entry in goldens['acyclic_probability']['values']:
        p, expected = Fraction(entry['p']), Fraction(entry['probability'])
        assert enumeration.acyclic_probability(entry['N'], p) == expected
        assert acyclic_prob_exact(small_table, entry['N'], float(p)) == approx(float(expected), abs=1e-12)
