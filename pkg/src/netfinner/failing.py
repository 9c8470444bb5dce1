"""Independent source failures (the percolation overlay).

Each source fails with its own probability; a party is inconclusive exactly
when at least one of its sources failed, and otherwise reports what the ideal
model would. Two constructions of the same statistics are provided: a direct
overlay of an ideal distribution, and an explicit quantum model in which
every edge carries an extra flag qubit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classical import ClassicalNetworkModel
from .distribution import FAIL, OutcomeDistribution
from .errors import ModelError
from .linalg import kron_all, permute_subsystems
from .network import NetworkGraph
from .quantum import PartyPOVM, QuantumNetworkModel, SourceState

MAX_SOURCES = 20


@dataclass(frozen=True)
class FailureProbabilities:
    e: tuple[float, ...]

    def __post_init__(self) -> None:
        e = tuple(float(x) for x in self.e)
        for i, x in enumerate(e):
            if not 0.0 <= x <= 1.0:
                raise ModelError(f"failure probability of source {i} is {x}, outside [0, 1]")
        object.__setattr__(self, "e", e)

    @classmethod
    def parse(cls, text: str) -> "FailureProbabilities":
        """From a comma-separated list such as ``"0.1,0.2,0.3"``."""
        return cls(tuple(float(t) for t in text.split(",") if t.strip()))

    def __len__(self) -> int:
        return len(self.e)

    def success_probability(self) -> float:
        return float(np.prod([1 - x for x in self.e]))


def _coerce(e) -> FailureProbabilities:
    return e if isinstance(e, FailureProbabilities) else FailureProbabilities(tuple(e))


def overlay_distribution(ideal: OutcomeDistribution, graph: NetworkGraph, e) -> OutcomeDistribution:
    """Exact failing-source distribution built over an ideal (failure-free) one.

    Enumerates all ``2^N`` failure patterns; parties touched by a failed
    source output the failure label and the rest follow the ideal marginal.
    """
    e = _coerce(e)
    n = graph.n_sources
    if n > MAX_SOURCES:
        raise ModelError(f"{n} sources exceed the enumeration limit of {MAX_SOURCES}")
    if len(e) != n:
        raise ModelError("one failure probability per source required")
    if ideal.has_failures():
        raise ModelError("ideal distribution must not contain the failure label")
    if ideal.n_parties != graph.n_parties:
        raise ModelError("distribution and graph disagree on the number of parties")

    inc = graph.incidence.astype(bool)
    # weight of every set of failed parties, accumulated over failure patterns
    weights: dict[tuple[bool, ...], float] = {}
    for mask in range(1 << n):
        failed = [(mask >> i) & 1 == 1 for i in range(n)]
        w = 1.0
        for i, f in enumerate(failed):
            w *= e.e[i] if f else 1.0 - e.e[i]
        if w == 0.0:
            continue
        dead = tuple(bool(inc[failed, j].any()) for j in range(graph.n_parties))
        weights[dead] = weights.get(dead, 0.0) + w

    sizes = [len(a) for a in ideal.alphabets]
    out = np.zeros([k + 1 for k in sizes])
    for dead, w in sorted(weights.items()):
        drop = tuple(j for j, d in enumerate(dead) if d)
        table = ideal.probabilities.sum(axis=drop) if drop else ideal.probabilities
        idx = tuple(sizes[j] if d else slice(0, sizes[j]) for j, d in enumerate(dead))
        out[idx] += w * table
    alphabets = tuple(a + (FAIL,) for a in ideal.alphabets)
    return OutcomeDistribution(alphabets, out, graph)


def failing_lv_model(graph: NetworkGraph, e) -> ClassicalNetworkModel:
    """Local model: source ``i`` sends 0 (failed) w.p. ``e_i`` else 1; parties output 1 or the failure label."""
    e = _coerce(e)
    if len(e) != graph.n_sources:
        raise ModelError("one failure probability per source required")
    dists = tuple(np.array([x, 1.0 - x]) for x in e.e)
    responses = []
    for j in range(graph.n_parties):
        k = len(graph.sources_of(j))
        table = np.full((2,) * k, FAIL, dtype=object)
        table[(1,) * k] = 1
        responses.append(table)
    return ClassicalNetworkModel(graph, dists, tuple(responses))


def _flagged_matrix(psi: np.ndarray, e: float, theta: np.ndarray, leak: float = 0.0) -> np.ndarray:
    dl, dr = psi.shape
    out = np.zeros((2 * dl, 2 * dr), dtype=complex)
    out[dl:, dr:] = np.sqrt(1.0 - e) * psi
    out[:dl, :dr] = np.sqrt(e) * theta
    if leak:
        out = np.sqrt(1.0 - leak) * out
        out[dl:, :dr] += np.sqrt(leak) * theta
    return out


def _default_theta(dims: tuple[int, int]) -> np.ndarray:
    theta = np.zeros(dims, dtype=complex)
    theta[0, 0] = 1.0
    return theta


def flag_povm(povm: PartyPOVM, payload_dims: Sequence[int]) -> PartyPOVM:
    """Conclusive elements act on payloads only when every incoming flag reads 1."""
    if FAIL in povm.labels:
        raise ModelError("ideal POVM must not have a failure outcome")
    k = len(payload_dims)
    ones = np.zeros((2**k, 2**k))
    ones[-1, -1] = 1.0
    # operator is built as (flags..., payloads...) and reordered to (f1, p1, f2, p2, ...)
    dims = [2] * k + list(payload_dims)
    perm = [x for e in range(k) for x in (e, k + e)]
    elems = [permute_subsystems(np.kron(ones, m), dims, perm) for m in povm.elements]
    d = elems[0].shape[0]
    fail = np.eye(d) - sum(elems)
    return PartyPOVM(povm.labels + (FAIL,), tuple(elems) + (fail,))


def flag_qubit_model(
    ideal: QuantumNetworkModel,
    e,
    junk_states: Sequence[np.ndarray | None] | None = None,
    leak: float = 0.0,
) -> QuantumNetworkModel:
    """Failing-source quantum model with a flag qubit on every edge.

    Source ``i`` prepares ``sqrt(1-e)|11>|psi> + sqrt(e)|00>|theta>`` (flag
    factor leading on each side). ``junk_states`` sets the failure-branch
    payload matrices (default ``|0>|0>``). A nonzero ``leak`` mixes in
    ``|10>|theta>`` amplitude, which breaks the failing-source structure.
    """
    e = _coerce(e)
    g = ideal.graph
    if len(e) != g.n_sources:
        raise ModelError("one failure probability per source required")
    junk_states = [None] * g.n_sources if junk_states is None else list(junk_states)
    states = []
    for i, st in enumerate(ideal.states):
        theta = _default_theta(st.dims) if junk_states[i] is None else np.asarray(junk_states[i], complex)
        if theta.shape != st.dims:
            raise ModelError(f"junk state of source {i} must have shape {st.dims}")
        theta = theta / np.linalg.norm(theta)
        states.append(SourceState.from_matrix(_flagged_matrix(st.matrix, e.e[i], theta, leak), normalize=True))
    povms = [flag_povm(p, ideal.edge_dims(j)) for j, p in enumerate(ideal.povms)]
    return QuantumNetworkModel(g, tuple(states), tuple(povms), ideal.dim_cap)


def payload_unitary_conjugation(model: QuantumNetworkModel, unitaries: Sequence[tuple[np.ndarray, np.ndarray]]) -> QuantumNetworkModel:
    """Apply local unitaries to the payload factor of every edge of a flag model.

    ``unitaries[i] = (u_left, u_right)`` act on source ``i``'s payloads; each
    POVM is conjugated accordingly so the statistics are unchanged.
    """
    g = model.graph
    full: dict[tuple[int, int], np.ndarray] = {}
    states = []
    for i, st in enumerate(model.states):
        ul, ur = unitaries[i]
        wl = np.kron(np.eye(2), ul)
        wr = np.kron(np.eye(2), ur)
        left, right = g.parties_of(i)
        full[(i, left)], full[(i, right)] = wl, wr
        states.append(SourceState.from_matrix(wl @ st.matrix @ wr.T))
    povms = []
    for j, p in enumerate(model.povms):
        w = kron_all([full[(i, j)] for i in g.sources_of(j)])
        povms.append(PartyPOVM(p.labels, tuple(w @ m @ w.conj().T for m in p.elements)))
    return QuantumNetworkModel(g, tuple(states), tuple(povms), model.dim_cap)
