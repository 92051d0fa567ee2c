from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from pytest import approx
from scipy.stats import chisquare

from critforest.scaling import enumeration
from critforest.scaling.errors import BoundUndefinedError, CapacityError, DomainError
from critforest.scaling.graphs import Forest
from critforest.scaling.samplers import (
    EXACT, REJECTION, add_uniform_edges, almost_monotone_triple, edge_count_law, prufer_decode, sample_edge_count,
    sample_forest_nm, sample_forest_np, sample_gnm, sample_gnp, sample_gnp_coupled, sample_uniform_tree,
    sequential_cycle_bound,
)


def test_prufer_star():
    assert prufer_decode([3, 3, 3], 5).tolist() == [[0, 3], [1, 3], [2, 3], [3, 4]]
    assert prufer_decode([], 2).tolist() == [[0, 1]]
    assert prufer_decode([], 1).shape == (0, 2)


def test_uniform_tree_is_uniform(rng):
    trees = enumeration.all_trees(4)
    counts = Counter(sample_uniform_tree(4, rng).key() for _ in range(8000))
    assert set(counts) == set(trees)
    assert chisquare([counts[tree] for tree in trees]).pvalue > 1e-4


def test_forest_nm_exact_is_uniform(small_table, rng):
    N, m = 5, 3
    counts = Counter(sample_forest_nm(small_table, N, m, rng, EXACT).key() for _ in range(11000))
    forests = enumeration.forests_with_edges(N, m)
    assert len(forests) == enumeration.forest_counts(N)[m] == 110
    assert set(counts) == set(forests)
    assert chisquare([counts[forest] for forest in forests]).pvalue > 1e-4


def test_forest_nm_rejection(rng):
    forest = sample_forest_nm(None, 30, 14, rng, REJECTION)
    assert isinstance(forest, Forest)
    assert forest.n_edges == 14
    assert forest.is_forest()


def test_edge_count_law_matches_enumeration(small_table):
    p = Fraction(3, 10)
    weights = {m: Fraction(0) for m in range(5)}
    for forest in enumeration.all_forests(5):
        weights[len(forest)] += p ** len(forest) * (1 - p) ** (10 - len(forest))
    total = sum(weights.values())
    law = edge_count_law(small_table, 5, 0.3)
    assert law.sum() == approx(1.0)
    for m, weight in weights.items():
        assert law[m] == approx(float(weight / total), abs=1e-12)


def test_forest_np_strategies(small_table, rng):
    exact = sample_forest_np(small_table, 10, 0.15, rng)
    rejected = sample_forest_np(None, 10, 0.15, rng)
    assert exact.is_forest() and rejected.is_forest()
    assert 0 <= sample_edge_count(small_table, 10, 0.15, rng) <= 9
    with pytest.raises(CapacityError):
        sample_forest_np(None, 10, 0.15, rng, EXACT)
    with pytest.raises(DomainError):
        sample_forest_np(small_table, 10, 0.15, rng, 'magic')
    with pytest.raises(DomainError):
        sample_forest_np(small_table, 10, 1.0, rng)


def test_forest_np_edge_counts_agree(small_table, rng):
    law = edge_count_law(small_table, 6, 0.3)
    counts = np.bincount([sample_forest_np(None, 6, 0.3, rng).n_edges for _ in range(6000)], minlength=6)
    expected = law * counts.sum()
    keep = expected > 5
    observed, expected = counts[keep], expected[keep]
    assert chisquare(observed, expected * observed.sum() / expected.sum()).pvalue > 1e-4


def test_random_graphs(rng):
    graph = sample_gnm(20, 30, rng)
    assert graph.n_edges == 30
    assert len(graph.edge_set()) == 30
    assert sample_gnp(20, 0.0, rng).n_edges == 0
    assert sample_gnp(20, 1.0, rng).n_edges == 190
    with pytest.raises(DomainError):
        sample_gnm(5, 11, rng)


def test_coupled_graphs_are_nested(rng):
    low, mid, high = sample_gnp_coupled(40, [0.02, 0.05, 0.1], rng)
    assert mid.contains(low)
    assert high.contains(mid)
    assert sample_gnp_coupled(40, [], rng) == []


def test_sequential_cycle_bound():
    assert sequential_cycle_bound(100.0, 5, 100) == approx(0.1 / 0.9)
    with pytest.raises(BoundUndefinedError):
        sequential_cycle_bound(1000.0, 5, 100)


def test_add_uniform_edges(rng):
    forest = Forest(50, [(0, 1), (2, 3)])
    for _ in range(20):
        result = add_uniform_edges(forest, 10, rng)
        assert result.added.shape == (10, 2)
        if not result.failed:
            assert Forest(50, np.concatenate([forest.edges, result.added]), validate=True).n_edges == 12
        else:
            assert 1 <= result.failed_at <= 10


@pytest.mark.slow
def test_almost_monotone_triple(rng):
    N, m = 500, 250
    for _ in range(20):
        triple = almost_monotone_triple(None, N, m, rng)
        assert triple.middle.n_edges == m
        assert triple.lower.n_edges < triple.upper.n_edges or not triple.in_window
        if triple.monotone:
            assert triple.in_window
            assert triple.verify_chain()
    with pytest.raises(DomainError):
        almost_monotone_triple(None, 20, 1, rng)
