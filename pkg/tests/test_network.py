import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netfinner.errors import NetworkError
from netfinner.network import (
    FractionalIndependentSet,
    NetworkGraph,
    dress_inputs,
    half_weights,
    validate,
)


def test_triangle_is_valid_and_bipartite():
    rep = validate(NetworkGraph.triangle())
    assert rep.valid
    assert rep.bipartite_sources


def test_single_edge_is_valid():
    assert validate(NetworkGraph.from_sources([[0, 1]], 2)).valid


def test_duplicate_sources_reported_once():
    rep = validate(NetworkGraph.from_sources([[0, 1], [0, 1]], 2))
    assert not rep.valid
    assert len(rep.violations) == 1
    assert "redundant" in rep.violations[0]


def test_strict_subset_is_redundant():
    g = NetworkGraph.from_sources([[0, 1, 2], [1, 2]], 3)
    rep = validate(g)
    assert not rep.valid
    assert not rep.bipartite_sources


def test_empty_row_and_column():
    g = NetworkGraph(np.array([[1, 1, 0], [0, 0, 0]]))
    rep = validate(g)
    assert any("source 1" in v for v in rep.violations)
    assert any("party 2" in v for v in rep.violations)


def test_validate_is_idempotent():
    g = NetworkGraph.from_sources([[0, 1], [0, 1], [1, 2]], 3)
    assert validate(g) == validate(g)


@pytest.mark.parametrize(
    "settings_, n_sources, n_parties",
    [([2, 2], 3, 4), ([1], 2, 2), ([2, 2, 2], 4, 6)],
)
def test_dress_inputs_shapes(settings_, n_sources, n_parties):
    g = dress_inputs(settings_)
    assert (g.n_sources, g.n_parties) == (n_sources, n_parties)


def test_dress_inputs_bipartite_for_two_parties():
    g = dress_inputs([2, 2])
    assert g.bipartite_sources
    assert validate(g).valid


def test_dress_inputs_single_party_shared_source_is_redundant():
    # with one measuring party the "shared" source only reaches that party
    rep = validate(dress_inputs([1]))
    assert not rep.valid


def test_dress_inputs_three_parties_has_hyperedge():
    # the shared source reaches all measuring parties, so only k <= 2 stays bipartite
    assert not dress_inputs([2, 2, 2]).bipartite_sources


def test_dress_inputs_rejects_zero_settings():
    with pytest.raises(NetworkError):
        dress_inputs([2, 0])


@pytest.mark.parametrize("graph", [NetworkGraph.triangle(), NetworkGraph.from_sources([[0, 1]], 2), NetworkGraph.cycle(4)])
def test_half_weights_perfect(graph):
    w = half_weights(graph)
    assert w.perfect
    assert np.allclose(w.weights, 0.5)
    assert np.allclose(graph.incidence @ np.asarray(w.weights), 1.0)


def test_half_weights_rejects_hypergraph():
    with pytest.raises(NetworkError):
        half_weights(NetworkGraph.from_sources([[0, 1, 2]], 3))


def test_fractional_set_rejects_overweight():
    with pytest.raises(NetworkError):
        FractionalIndependentSet.for_graph(NetworkGraph.from_sources([[0, 1]], 2), [0.7, 0.7])


def test_fractional_set_not_perfect():
    w = FractionalIndependentSet.for_graph(NetworkGraph.triangle(), [0.5, 0.5, 0.25])
    assert not w.perfect


def test_unknown_party_rejected():
    with pytest.raises(NetworkError):
        NetworkGraph.from_sources([[0, 3]], 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 8))
def test_cycles_valid(n):
    g = NetworkGraph.cycle(n)
    assert validate(g).valid
    assert half_weights(g).perfect
