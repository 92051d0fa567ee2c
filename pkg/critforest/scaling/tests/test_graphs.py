import numpy as np
import pytest

from critforest.scaling.enumeration import edge_slots
from critforest.scaling.errors import ValidationError
from critforest.scaling.graphs import Forest, Graph, UnionFind, decode_slots, encode_slots, validate_forest


def test_slot_codes_follow_enumeration_order():
    N = 6
    slots = np.array(edge_slots(N))
    assert np.array_equal(encode_slots(N, slots), np.arange(len(slots)))
    assert np.array_equal(decode_slots(N, np.arange(len(slots))), slots)
    assert encode_slots(N, np.array([[4, 1]]))[0] == encode_slots(N, np.array([[1, 4]]))[0]


def test_union_find():
    union_find = UnionFind(5)
    assert union_find.union(0, 1)
    assert union_find.union(3, 1)
    assert not union_find.union(0, 3)
    assert union_find.component_size(3) == 3
    assert union_find.component_size(4) == 1
    copy = union_find.copy()
    copy.union(2, 4)
    assert union_find.component_size(4) == 1
    with pytest.raises(ValidationError):
        UnionFind.from_edges(3, [(0, 1), (1, 2), (2, 0)])


def test_components():
    graph = Graph(7, [(0, 1), (1, 2), (4, 5)])
    assert graph.component_sizes().tolist() == [3, 2, 1, 1]
    assert graph.squared_sizes() == 9 + 4 + 1 + 1
    assert graph.is_forest()
    assert not Graph(3, [(0, 1), (1, 2), (0, 2)]).is_forest()
    assert not Graph(3, [(0, 1), (1, 0)]).is_forest()


def test_containment_and_equality():
    small = Graph(4, [(0, 1)])
    large = Graph(4, [(2, 3), (1, 0)])
    assert large.contains(small)
    assert not small.contains(large)
    assert Graph(4, [(1, 0), (3, 2)]) == large
    assert len({large, Graph(4, [(3, 2), (0, 1)])}) == 1


def test_neighbour_lists_sorted():
    indptr, indices = Graph(4, [(0, 3), (0, 1), (2, 0)]).neighbour_lists()
    assert indices[indptr[0]:indptr[1]].tolist() == [1, 2, 3]


def test_forest_validation():
    with pytest.raises(ValidationError):
        Forest(3, [(0, 1), (1, 2), (0, 2)], validate=True)
    with pytest.raises(ValidationError):
        Forest(3, [(0, 3)])
    forest = Forest.from_codes(5, np.array([0, 4, 9]))
    assert forest.n_edges == 3
    with pytest.raises(ValidationError):
        validate_forest(forest, n_edges=2)
    assert Forest(0).component_sizes().size == 0
