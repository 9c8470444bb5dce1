import numpy as np
import pytest

from netfinner.distribution import (
    FAIL,
    all_conclusive_probability,
    conditional_on_conclusive,
    marginal,
)
from netfinner.errors import ModelError
from netfinner.failing import (
    FailureProbabilities,
    flag_qubit_model,
    overlay_distribution,
    payload_unitary_conjugation,
)
from netfinner.finner import finner_check
from netfinner.linalg import random_unitary
from netfinner.network import NetworkGraph
from netfinner.quantum import PartyPOVM, QuantumNetworkModel, joint_distribution

from .conftest import random_bipartite_graph, random_distribution, random_quantum_model

TRI = NetworkGraph.triangle()


def test_parse():
    assert FailureProbabilities.parse("0.1, 0.2,0.3").e == (0.1, 0.2, 0.3)


def test_out_of_range_rejected():
    with pytest.raises(ModelError):
        FailureProbabilities((0.1, 1.2))


def test_zero_failure_is_ideal(rng):
    ideal = random_distribution(rng, 3)
    d = overlay_distribution(ideal, TRI, (0, 0, 0))
    assert np.all(d.probabilities[..., -1] == 0)
    assert np.allclose(d.probabilities[:-1, :-1, :-1], ideal.probabilities)


def test_triangle_example(rng):
    ideal = random_distribution(rng, 3)
    d = overlay_distribution(ideal, TRI, (0.1, 0.2, 0.3))
    assert all_conclusive_probability(d) == pytest.approx(0.504, abs=1e-15)
    marg = [all_conclusive_probability(d, [j]) for j in range(3)]
    assert np.prod(marg) == pytest.approx(0.504**2, abs=1e-15)
    rep = finner_check(d, TRI)
    assert rep.saturated
    assert np.allclose(rep.implied_e, (0.1, 0.2, 0.3), atol=1e-12)


def test_party_marginal_is_product_of_its_sources(rng):
    e = (0.1, 0.2, 0.3)
    d = overlay_distribution(random_distribution(rng, 3), TRI, e)
    # party 0 sees sources 0 and 2
    assert all_conclusive_probability(d, [0]) == pytest.approx(0.9 * 0.7)


def test_certain_failure():
    g = NetworkGraph.from_sources([[0, 1]], 2)
    ideal = random_distribution(np.random.default_rng(0), 2)
    d = overlay_distribution(ideal, g, (1.0,))
    assert d[(FAIL, FAIL)] == 1.0


def test_ideal_with_failures_rejected(rng):
    d = overlay_distribution(random_distribution(rng, 3), TRI, (0.1, 0.1, 0.1))
    with pytest.raises(ModelError):
        overlay_distribution(d, TRI, (0.1, 0.1, 0.1))


def test_too_many_sources():
    g = NetworkGraph.from_sources([[k, k + 1] for k in range(21)], 22)
    ideal = random_distribution(np.random.default_rng(0), 22, max_outcomes=1)
    with pytest.raises(ModelError):
        overlay_distribution(ideal, g, (0.1,) * 21)


@pytest.mark.parametrize("seed", range(15))
def test_conditional_recovers_ideal(seed):
    rng = np.random.default_rng(seed)
    g = random_bipartite_graph(rng)
    ideal = random_distribution(rng, g.n_parties)
    e = rng.uniform(0, 0.9, g.n_sources)
    cond, success = conditional_on_conclusive(overlay_distribution(ideal, g, e))
    assert success == pytest.approx(np.prod(1 - e), abs=1e-14)
    assert np.allclose(cond.probabilities, ideal.probabilities, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_flag_model_equals_overlay(seed):
    rng = np.random.default_rng(seed)
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    e = rng.uniform(0, 1, 3)
    flagged = joint_distribution(flag_qubit_model(ideal, e))
    overlay = overlay_distribution(joint_distribution(ideal), TRI, e)
    assert flagged.max_abs_diff(overlay) <= 1e-10


def test_flag_model_zero_failure_equals_ideal(rng):
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    d = joint_distribution(flag_qubit_model(ideal, (0, 0, 0)))
    assert np.allclose(d.probabilities[:-1, :-1, :-1], joint_distribution(ideal).probabilities, atol=1e-12)
    assert d.probabilities[..., -1].sum() <= 1e-12


def test_junk_state_does_not_matter(rng):
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    e = (0.3, 0.4, 0.5)
    junk = [rng.normal(size=s.dims) + 1j * rng.normal(size=s.dims) for s in ideal.states]
    a = joint_distribution(flag_qubit_model(ideal, e))
    b = joint_distribution(flag_qubit_model(ideal, e, junk_states=junk))
    assert a.max_abs_diff(b) <= 1e-12


def test_phi_plus_flag_example(phi_plus):
    g = NetworkGraph.from_sources([[0, 1]], 2)
    comp = PartyPOVM.computational(2)
    m = flag_qubit_model(QuantumNetworkModel(g, (phi_plus,), (comp, comp)), (0.36,))
    lam = m.states[0].schmidt.coefficients
    assert np.allclose(lam, [0.6, np.sqrt(0.32), np.sqrt(0.32)], atol=1e-12)
    d = joint_distribution(m)
    assert all_conclusive_probability(d, [0]) == pytest.approx(0.64, abs=1e-12)
    assert np.allclose(marginal(d, [0]).probabilities[:2], [0.32, 0.32])


def test_payload_conjugation_keeps_statistics(rng):
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    flagged = flag_qubit_model(ideal, (0.2, 0.3, 0.4))
    us = [(random_unitary(s.dims[0], rng), random_unitary(s.dims[1], rng)) for s in ideal.states]
    rotated = payload_unitary_conjugation(flagged, us)
    assert joint_distribution(rotated).max_abs_diff(joint_distribution(flagged)) <= 1e-12


def test_flag_model_respects_dimension_cap(rng):
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    small = QuantumNetworkModel(ideal.graph, ideal.states, ideal.povms, dim_cap=ideal.total_dim)
    with pytest.raises(ModelError):
        flag_qubit_model(small, (0.1, 0.1, 0.1))
