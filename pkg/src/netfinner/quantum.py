"""Finite-dimensional quantum network models and their exact output statistics.

Every source is bipartite and prepares a pure state on ``d_left x d_right``.
The left factor goes to the lower-indexed of the two parties it feeds. Each
party measures the tensor product of its incoming edges, ordered by ascending
source index; mixed sources are modelled by enlarging one local dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Sequence

import numpy as np

from .distribution import FAIL, OutcomeDistribution
from .errors import ModelError
from .linalg import dagger
from .network import NetworkGraph

DEFAULT_DIM_CAP = 4096
OP_TOL = 1e-10
RENORM_TOL = 1e-6


def _orthonormal_completion(vectors: np.ndarray, d: int) -> np.ndarray:
    """Extend the orthonormal columns of ``vectors`` to a ``d x d`` unitary.

    New columns are Gram-Schmidt images of the computational basis in
    lexicographic order, which keeps the completion deterministic.
    """
    cols = [vectors[:, k] for k in range(vectors.shape[1])]
    for k in range(d):
        if len(cols) == d:
            break
        w = np.zeros(d, dtype=complex)
        w[k] = 1.0
        for c in cols:
            w = w - c * np.vdot(c, w)
        n = np.linalg.norm(w)
        if n > 1e-8:
            cols.append(w / n)
    return np.stack(cols, axis=1) if cols else np.zeros((d, 0), dtype=complex)


def _canonical_block(block: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(block): projected computational vectors."""
    d, r = block.shape
    proj = block @ dagger(block)
    cols: list[np.ndarray] = []
    for k in range(d):
        if len(cols) == r:
            break
        w = proj[:, k].copy()
        for c in cols:
            w = w - c * np.vdot(c, w)
        n = np.linalg.norm(w)
        if n > 1e-8:
            cols.append(w / n)
    return np.stack(cols, axis=1)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > np.abs(v).max() - 1e-9))
    return v * (abs(v[k]) / v[k])


@dataclass(frozen=True)
class Schmidt:
    """``|psi> = sum_l coefficients[l] |left[:, l]> |right[:, l]>``.

    ``coefficients`` holds the nonzero Schmidt amplitudes (descending); the
    bases are full unitaries whose leading columns are the Schmidt vectors.
    """

    coefficients: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    def reconstruct(self) -> np.ndarray:
        r = self.rank
        return (self.left[:, :r] * self.coefficients) @ self.right[:, :r].T


@dataclass(frozen=True, eq=False)
class SourceState:
    dims: tuple[int, int]
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        dl, dr = (int(d) for d in self.dims)
        if dl < 1 or dr < 1:
            raise ModelError("local dimensions must be positive")
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size != dl * dr:
            raise ModelError(f"state has {amp.size} amplitudes, expected {dl * dr}")
        n = np.linalg.norm(amp)
        if abs(n - 1.0) > RENORM_TOL:
            raise ModelError(f"state norm {n:.8g} is not 1")
        amp = amp / n
        amp.setflags(write=False)
        object.__setattr__(self, "dims", (dl, dr))
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_matrix(cls, psi: np.ndarray, normalize: bool = False) -> "SourceState":
        psi = np.asarray(psi, dtype=complex)
        if normalize:
            psi = psi / np.linalg.norm(psi)
        return cls(psi.shape, psi.reshape(-1))

    @classmethod
    def product(cls, left: np.ndarray, right: np.ndarray) -> "SourceState":
        return cls.from_matrix(np.outer(left, right))

    @property
    def matrix(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    @cached_property
    def schmidt(self) -> Schmidt:
        return schmidt_decompose(self)

    def reduced(self, side: int) -> np.ndarray:
        """Reduced density matrix of the left (0) or right (1) factor."""
        m = self.matrix
        return m @ dagger(m) if side == 0 else (dagger(m) @ m).T


def schmidt_decompose(state: SourceState, cutoff: float = 1e-12) -> Schmidt:
    """Schmidt amplitudes (descending) and deterministic local bases.

    Degenerate Schmidt values get a basis built from the projected
    computational vectors in lexicographic order; each vector's largest entry
    is made real positive.
    """
    psi = state.matrix
    dl, dr = state.dims
    u, s, _ = np.linalg.svd(psi)
    rank = int(np.sum(s > cutoff))
    lam = s[:rank]
    cols: list[np.ndarray] = []
    start = 0
    while start < rank:
        stop = start + 1
        while stop < rank and abs(lam[stop] - lam[start]) <= 1e-10 * max(1.0, lam[start]):
            stop += 1
        if stop - start == 1:
            cols.append(_fix_phase(u[:, start]))
        else:
            block = _canonical_block(u[:, start:stop])
            cols.extend(_fix_phase(block[:, k]) for k in range(block.shape[1]))
        start = stop
    left_r = np.stack(cols, axis=1) if cols else np.zeros((dl, 0), dtype=complex)
    # right vectors follow from psi^T conj(u_l) = lambda_l v_l
    right_r = (psi.T @ left_r.conj()) / lam if rank else np.zeros((dr, 0), dtype=complex)
    left = _orthonormal_completion(left_r, dl)
    right = _orthonormal_completion(right_r, dr)
    return Schmidt(lam.copy(), left, right)


@dataclass(frozen=True, eq=False)
class PartyPOVM:
    labels: tuple[Hashable, ...]
    elements: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        elems = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        if len(labels) != len(elems) or not labels:
            raise ModelError("POVM needs one element per label and at least one label")
        if len(set(labels)) != len(labels):
            raise ModelError(f"duplicate POVM labels {labels}")
        d = elems[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for lab, e in zip(labels, elems):
            if e.shape != (d, d):
                raise ModelError("POVM elements must be square and of equal size")
            if np.max(np.abs(e - dagger(e))) > OP_TOL:
                raise ModelError(f"POVM element {lab!r} is not Hermitian")
            if np.linalg.eigvalsh(e).min() < -OP_TOL:
                raise ModelError(f"POVM element {lab!r} is not positive semidefinite")
            total += e
        if np.max(np.abs(total - np.eye(d))) > OP_TOL:
            raise ModelError("POVM elements do not sum to the identity")
        for e in elems:
            e.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "elements", elems)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __getitem__(self, label: Hashable) -> np.ndarray:
        return self.elements[self.labels.index(label)]

    def conclusive_labels(self) -> tuple[Hashable, ...]:
        return tuple(lab for lab in self.labels if lab != FAIL)

    def conclusive_element(self, labels: Sequence[Hashable] | None = None) -> np.ndarray:
        """Sum of the elements for ``labels`` (all non-failure labels by default)."""
        labels = self.conclusive_labels() if labels is None else labels
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for lab in labels:
            out = out + self[lab]
        return out

    @classmethod
    def projective(cls, labels: Sequence[Hashable], vectors: Sequence[np.ndarray]) -> "PartyPOVM":
        return cls(tuple(labels), tuple(np.outer(v, np.conj(v)) for v in vectors))

    @classmethod
    def computational(cls, d: int, labels: Sequence[Hashable] | None = None) -> "PartyPOVM":
        labels = tuple(range(d)) if labels is None else tuple(labels)
        return cls.projective(labels, list(np.eye(d)))


@dataclass(frozen=True, eq=False)
class QuantumNetworkModel:
    graph: NetworkGraph
    states: tuple[SourceState, ...]
    povms: tuple[PartyPOVM, ...]
    dim_cap: int = field(default=DEFAULT_DIM_CAP)

    def __post_init__(self) -> None:
        self.graph.require_bipartite()
        states, povms = tuple(self.states), tuple(self.povms)
        if len(states) != self.graph.n_sources:
            raise ModelError("one state per source required")
        if len(povms) != self.graph.n_parties:
            raise ModelError("one POVM per party required")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "povms", povms)
        for j in range(self.graph.n_parties):
            want = int(np.prod(self.edge_dims(j)))
            if povms[j].dim != want:
                raise ModelError(
                    f"party {j} POVM acts on dimension {povms[j].dim}, its edges give {want}"
                )
        if self.total_dim > self.dim_cap:
            raise ModelError(f"global dimension {self.total_dim} exceeds cap {self.dim_cap}")

    def side(self, source: int, party: int) -> int:
        """0 if ``party`` holds the left factor of ``source``, 1 for the right."""
        parties = self.graph.parties_of(source)
        if party not in parties:
            raise ModelError(f"party {party} is not fed by source {source}")
        return parties.index(party)

    def edge_dim(self, source: int, party: int) -> int:
        return self.states[source].dims[self.side(source, party)]

    def edge_dims(self, party: int) -> tuple[int, ...]:
        return tuple(self.edge_dim(i, party) for i in self.graph.sources_of(party))

    @property
    def total_dim(self) -> int:
        return int(np.prod([s.dims[0] * s.dims[1] for s in self.states]))

    def party_marginal_state(self, party: int) -> np.ndarray:
        """Reduced state of everything ``party`` receives (product over its edges)."""
        out = np.ones((1, 1), dtype=complex)
        for i in self.graph.sources_of(party):
            out = np.kron(out, self.states[i].reduced(self.side(i, party)))
        return out

    def with_states(self, states: Sequence[SourceState]) -> "QuantumNetworkModel":
        return QuantumNetworkModel(self.graph, tuple(states), self.povms, self.dim_cap)

    def with_povms(self, povms: Sequence[PartyPOVM]) -> "QuantumNetworkModel":
        return QuantumNetworkModel(self.graph, self.states, tuple(povms), self.dim_cap)


def global_state(model: QuantumNetworkModel) -> tuple[np.ndarray, list[int]]:
    """Product of all source states in party-major order, as a tensor with one axis per party.

    Returns the tensor and the per-party dimensions.
    """
    g = model.graph
    vec = np.ones(1, dtype=complex)
    axis_of: dict[tuple[int, int], int] = {}
    dims: list[int] = []
    for i, st in enumerate(model.states):
        vec = np.kron(vec, st.amplitudes)
        for side, j in enumerate(g.parties_of(i)):
            axis_of[(i, j)] = len(dims)
            dims.append(st.dims[side])
    order = [axis_of[(i, j)] for j in range(g.n_parties) for i in g.sources_of(j)]
    party_dims = [int(np.prod(model.edge_dims(j))) for j in range(g.n_parties)]
    psi = vec.reshape(dims).transpose(order).reshape(party_dims)
    return psi, party_dims


def joint_distribution(model: QuantumNetworkModel) -> OutcomeDistribution:
    """``P(a) = <Psi| (x)_j M_j^{a_j} |Psi>`` for every outcome tuple."""
    psi, _ = global_state(model)
    m = model.graph.n_parties
    t = psi
    # layout before step j: [K_0..K_{j-1}, D_0..D_{m-1}]
    for j, povm in enumerate(model.povms):
        stack = np.stack(povm.elements)
        t = np.tensordot(stack, t, axes=([2], [2 * j]))
        t = np.moveaxis(t, [0, 1], [j, 2 * j + 1])
    probs = np.tensordot(t, psi.conj(), axes=(list(range(m, 2 * m)), list(range(m))))
    probs = probs.real
    alphabets = tuple(p.labels for p in model.povms)
    return OutcomeDistribution(alphabets, probs, model.graph)
