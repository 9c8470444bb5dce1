import numpy as np
import pytest

from netfinner.classical import ClassicalNetworkModel, output_distribution
from netfinner.distribution import FAIL, OutcomeDistribution, product_distribution
from netfinner.errors import NetworkError
from netfinner.failing import (
    flag_qubit_model,
    overlay_distribution,
    payload_unitary_conjugation,
)
from netfinner.finner import finner_check, g_oracle, rigidity_verify
from netfinner.linalg import random_povm, random_unitary
from netfinner.network import NetworkGraph
from netfinner.quantum import (
    PartyPOVM,
    QuantumNetworkModel,
    SourceState,
    joint_distribution,
)

from .conftest import random_distribution, random_quantum_model

TRI = NetworkGraph.triangle()
EDGE = NetworkGraph.from_sources([[0, 1]], 2)


def bell_projector_model(rng):
    """Party 1 of a 3-party chain declares success on a Bell projection of its two edges."""
    g = NetworkGraph.from_sources([[0, 1], [1, 2]], 3)
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    bell = np.outer(phi, phi)
    states = tuple(SourceState((2, 2), v) for v in (np.array([1, 1, 1, 0]) / np.sqrt(3), phi))
    mid = PartyPOVM((1, FAIL), (bell, np.eye(4) - bell))
    comp = PartyPOVM.computational(2)
    return QuantumNetworkModel(g, states, (comp, mid, comp))


# --- finner_check ---------------------------------------------------------------------


def test_failing_triangle_recovers_e(rng):
    d = overlay_distribution(random_distribution(rng, 3), TRI, (0.1, 0.2, 0.3))
    rep = finner_check(d, TRI)
    assert rep.saturated
    assert rep.implied_e == pytest.approx((0.1, 0.2, 0.3), abs=1e-10)


def test_independent_product_not_saturated():
    d = product_distribution([[0.3, 0.7], [0.3, 0.7]], [("ok", FAIL), ("ok", FAIL)])
    rep = finner_check(d, EDGE)
    assert rep.lhs == pytest.approx(0.09)
    assert rep.rhs == pytest.approx(0.3)
    assert not rep.saturated


def test_all_conclusive_is_saturated_with_zero_e(rng):
    rep = finner_check(random_distribution(rng, 3), TRI)
    assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(1.0)
    assert rep.saturated
    assert rep.implied_e == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)


def test_implied_e_undefined_when_pair_never_conclusive():
    d = OutcomeDistribution(((0, FAIL), (0, FAIL)), np.array([[0.0, 0.5], [0.5, 0.0]]))
    assert finner_check(d, EDGE).implied_e == (None,)


def test_hypergraph_rejected(rng):
    g = NetworkGraph.from_sources([[0, 1, 2]], 3)
    with pytest.raises(NetworkError):
        finner_check(random_distribution(rng, 3), g)


@pytest.mark.parametrize("seed", range(25))
def test_quantum_inequality(seed):
    rng = np.random.default_rng(seed)
    rep = finner_check(joint_distribution(random_quantum_model(rng)), TRI)
    assert rep.slack >= -1e-10
    if rep.saturated:
        for e in rep.implied_e:
            assert e is None or -1e-9 <= e <= 1 + 1e-9


def test_implied_e_can_be_negative_off_saturation(phi_plus):
    # A succeeds on |0>, B on |0> or |1> with a bias: the two ends are anticorrelated
    a = PartyPOVM(("ok", FAIL), (np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))
    b = PartyPOVM(("ok", FAIL), (np.diag([0.2, 0.9]), np.diag([0.8, 0.1])))
    rep = finner_check(joint_distribution(QuantumNetworkModel(EDGE, (phi_plus,), (a, b))), EDGE)
    assert not rep.saturated
    assert rep.implied_e[0] < 0


@pytest.mark.parametrize("seed", range(25))
def test_classical_inequality(seed):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 4, size=3)
    dists = tuple(rng.dirichlet(np.ones(s)) for s in sizes)
    labels = np.array([0, FAIL], dtype=object)
    resp = tuple(labels[rng.integers(0, 2, size=(sizes[a], sizes[b]))] for a, b in ((0, 2), (0, 1), (1, 2)))
    d = output_distribution(ClassicalNetworkModel(TRI, dists, resp), [(0, FAIL)] * 3)
    assert finner_check(d, TRI).slack >= -1e-10


# --- rigidity -----------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(8))
def test_flag_models_are_rigid(seed):
    rng = np.random.default_rng(seed)
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    e = rng.uniform(0.05, 0.95, 3)
    v = rigidity_verify(flag_qubit_model(ideal, e))
    assert v.rigid
    assert v.finner.saturated
    assert v.schmidt_e == pytest.approx(tuple(e), abs=1e-9)


def test_rigid_after_payload_unitaries(rng):
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    flagged = flag_qubit_model(ideal, (0.2, 0.5, 0.7))
    us = [(random_unitary(s.dims[0], rng), random_unitary(s.dims[1], rng)) for s in ideal.states]
    assert rigidity_verify(payload_unitary_conjugation(flagged, us)).rigid


def test_bell_projector_is_not_rigid(rng):
    v = rigidity_verify(bell_projector_model(rng))
    assert not v.factorizes_over_edges[1]
    assert not v.rigid


def test_no_failure_labels_rigid_with_zero_e(rng):
    v = rigidity_verify(random_quantum_model(rng, with_fail=False))
    assert v.rigid
    assert v.finner.implied_e == pytest.approx((0, 0, 0), abs=1e-12)


def test_leak_breaks_saturation(rng):
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    v = rigidity_verify(flag_qubit_model(ideal, (0.3, 0.3, 0.3), leak=0.05))
    assert v.finner.slack > 1e-4
    assert not v.rigid


@pytest.mark.parametrize("seed", range(10))
def test_rigid_implies_saturated(seed):
    rng = np.random.default_rng(100 + seed)
    model = random_quantum_model(rng, max_dim=2)
    v = rigidity_verify(model)
    if v.rigid:
        assert v.finner.saturated


# --- g-oracle -----------------------------------------------------------------------------


def test_failing_model_chain_tight(rng):
    ideal = random_quantum_model(rng, max_dim=2, with_fail=False)
    rep = g_oracle(flag_qubit_model(ideal, (0.1, 0.4, 0.2)))
    assert all(rep.links_tight)
    assert max(rep.identity_errors) <= 1e-10


@pytest.mark.parametrize("seed", range(15))
def test_random_model_chain_holds(seed):
    rng = np.random.default_rng(seed)
    rep = g_oracle(random_quantum_model(rng, max_dim=2))
    assert rep.chain_holds
    assert max(rep.identity_errors) <= 1e-10
    # the signed sum reproduces the probability, the g-model bounds it in modulus
    assert rep.signed_sum.real == pytest.approx(rep.p_all, abs=1e-10)
    assert rep.expect_product_g >= abs(rep.signed_sum) - 1e-10


def test_generic_model_has_strict_link(rng):
    rep = g_oracle(random_quantum_model(rng, max_dim=2))
    assert not all(rep.links_tight)


def test_product_sources_collapse(rng):
    states = tuple(SourceState.product(np.array([1.0, 0]), np.array([0, 1.0])) for _ in range(3))
    povms = []
    for _ in range(3):
        elems = random_povm(4, 3, rng)
        povms.append(PartyPOVM((0, 1, FAIL), tuple(elems)))
    model = QuantumNetworkModel(TRI, states, tuple(povms))
    rep = g_oracle(model)
    # Schmidt rank 1: each g_j is the constant P[a_j conclusive], so the g-model links are
    # equalities; only tr(rho M^2) <= tr(rho M) stays strict for a non-projective M
    assert all(rep.links_tight[:3])
    assert rep.chain[0] == pytest.approx(np.prod(rep.tr_rho_m), abs=1e-12)


def test_explicit_targets(rng):
    model = random_quantum_model(rng, max_dim=2, with_fail=False)
    targets = [[p.labels[0]] for p in model.povms]
    rep = g_oracle(model, targets)
    d = joint_distribution(model)
    assert rep.p_all == pytest.approx(d.probabilities[0, 0, 0], abs=1e-14)
    assert rep.chain_holds
