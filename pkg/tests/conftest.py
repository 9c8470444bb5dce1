from __future__ import annotations

import itertools

import numpy as np
import pytest

from netfinner.classical import ClassicalNetworkModel
from netfinner.distribution import FAIL, OutcomeDistribution
from netfinner.linalg import (
    hermitian_part,
    kron_all,
    psd_power,
    random_povm,
    random_state,
    random_unitary,
)
from netfinner.network import NetworkGraph
from netfinner.quantum import PartyPOVM, QuantumNetworkModel, SourceState


def random_bipartite_graph(rng: np.random.Generator, max_sources: int = 5, max_parties: int = 5) -> NetworkGraph:
    """Distinct random edges, relabelled so every party is used."""
    while True:
        m = int(rng.integers(2, max_parties + 1))
        pairs = list(itertools.combinations(range(m), 2))
        n = int(rng.integers(1, min(max_sources, len(pairs)) + 1))
        chosen = [pairs[k] for k in rng.choice(len(pairs), size=n, replace=False)]
        used = sorted({j for p in chosen for j in p})
        relabel = {j: k for k, j in enumerate(used)}
        sources = [[relabel[a], relabel[b]] for a, b in chosen]
        if len(used) >= 2:
            return NetworkGraph.from_sources(sources, len(used))


def random_source(rng, dims) -> SourceState:
    return SourceState(tuple(dims), random_state(dims[0] * dims[1], rng))


def random_quantum_model(
    rng: np.random.Generator,
    graph: NetworkGraph | None = None,
    max_dim: int = 3,
    with_fail: bool = True,
    max_outcomes: int = 3,
    dim_budget: int = 729,
) -> QuantumNetworkModel:
    graph = NetworkGraph.triangle() if graph is None else graph
    while True:
        dims = [tuple(int(d) for d in rng.integers(1, max_dim + 1, size=2)) for _ in range(graph.n_sources)]
        if int(np.prod([a * b for a, b in dims])) <= dim_budget:
            break
    states = tuple(SourceState(d, random_state(d[0] * d[1], rng)) for d in dims)
    povms = []
    for j in range(graph.n_parties):
        d = 1
        for i in graph.sources_of(j):
            side = graph.parties_of(i).index(j)
            d *= dims[i][side]
        k = int(rng.integers(1, max_outcomes + 1))
        labels = tuple(range(k)) + ((FAIL,) if with_fail else ())
        elems = random_povm(d, len(labels), rng)
        povms.append(PartyPOVM(labels, tuple(elems)))
    return QuantumNetworkModel(graph, states, tuple(povms))


def random_filter(d: int, rng: np.random.Generator, low: float = 0.1) -> np.ndarray:
    u = random_unitary(d, rng)
    return hermitian_part(u @ np.diag(rng.uniform(low, 1.0, d)) @ u.conj().T)


def random_fair_sampling_model(rng: np.random.Generator, graph: NetworkGraph | None = None, max_dim: int = 3):
    """Every party's conclusive element is a product of random per-edge filters."""
    base = random_quantum_model(rng, graph, max_dim=max_dim, with_fail=False)
    g = base.graph
    povms = []
    for j, p in enumerate(base.povms):
        filters = [random_filter(d, rng) for d in base.edge_dims(j)]
        mc = kron_all(filters)
        s = psd_power(mc, 0.5)
        k = len(p.labels)
        inner = random_povm(mc.shape[0], k, rng)
        elems = [hermitian_part(s @ n @ s) for n in inner]
        elems.append(hermitian_part(np.eye(mc.shape[0]) - mc))
        povms.append(PartyPOVM(p.labels + (FAIL,), tuple(elems)))
    return QuantumNetworkModel(g, base.states, tuple(povms))


def random_distribution(rng: np.random.Generator, n_parties: int, max_outcomes: int = 3, graph=None) -> OutcomeDistribution:
    sizes = [int(rng.integers(1, max_outcomes + 1)) for _ in range(n_parties)]
    p = rng.dirichlet(np.ones(int(np.prod(sizes)))).reshape(sizes)
    return OutcomeDistribution(tuple(tuple(range(s)) for s in sizes), p, graph)


def random_classical_model(
    rng: np.random.Generator,
    graph: NetworkGraph | None = None,
    max_alphabet: int = 4,
    real_valued: bool = False,
    labels: tuple = (0, 1),
) -> ClassicalNetworkModel:
    graph = NetworkGraph.triangle() if graph is None else graph
    sizes = [int(rng.integers(1, max_alphabet + 1)) for _ in range(graph.n_sources)]
    dists = tuple(rng.dirichlet(np.ones(s)) for s in sizes)
    responses = []
    for j in range(graph.n_parties):
        shape = tuple(sizes[i] for i in graph.sources_of(j))
        if real_valued:
            responses.append(rng.normal(size=shape))
        else:
            responses.append(np.asarray(rng.choice(labels, size=shape)))
    return ClassicalNetworkModel(graph, dists, tuple(responses))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def phi_plus() -> SourceState:
    return SourceState((2, 2), np.array([1, 0, 0, 1]) / np.sqrt(2))


# one line per acceptance criterion, echoed at the end of the run even when output is captured
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
