"""Fair-sampling detection and loophole-free post-selection.

A party's measurement is fair-sampling exactly when its coarse-grained
conclusive element is a tensor product of per-edge filters ``0 <= T <= 1``.
When every party is fair-sampling, the filters can be pushed into the sources
and the post-selected statistics come from a model on the same network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ModelError, NotFairSamplingError
from .linalg import hermitian_part, kron_all, psd_power, support_projector
from .quantum import PartyPOVM, QuantumNetworkModel, SourceState

PRODUCT_TOL = 1e-9
PSD_TOL = 1e-10
BLOCKED_TOL = 1e-12


@dataclass(frozen=True)
class ProductTest:
    is_product: bool
    factors: tuple[np.ndarray, ...] | None
    failed_edge: int | None = None
    second_singular_value: float = 0.0


def product_test(op: np.ndarray, edge_dims: Sequence[int], tol: float = PRODUCT_TOL) -> ProductTest:
    """Split a PSD operator into per-edge factors, or report where it is entangled.

    Peels one edge at a time: the operator-Schmidt rank across ``edge k | rest``
    must be one (relative second singular value ``<= tol``). Factors are
    Hermitian with operator norm 1, except the first, which carries the scalar.
    """
    op = np.asarray(op, dtype=complex)
    dims = [int(d) for d in edge_dims]
    total = int(np.prod(dims))
    if op.shape != (total, total):
        raise ModelError(f"operator of shape {op.shape} does not act on dims {dims}")
    if np.max(np.abs(op - op.conj().T)) > PSD_TOL or np.linalg.eigvalsh(hermitian_part(op)).min() < -PSD_TOL:
        raise ModelError("product_test needs a positive semidefinite operator")
    if np.linalg.norm(op) == 0.0:
        factors = [np.zeros((dims[0], dims[0]), dtype=complex)] + [np.eye(d, dtype=complex) for d in dims[1:]]
        return ProductTest(True, tuple(factors))

    factors: list[np.ndarray] = []
    rest = op
    for k, d in enumerate(dims[:-1]):
        r = rest.shape[0] // d
        realigned = rest.reshape(d, r, d, r).transpose(0, 2, 1, 3).reshape(d * d, r * r)
        u, s, vh = np.linalg.svd(realigned, full_matrices=False)
        s2 = float(s[1]) if s.size > 1 else 0.0
        if s2 > tol * s[0]:
            return ProductTest(False, None, k, s2)
        a = (u[:, 0] * np.sqrt(s[0])).reshape(d, d)
        b = (vh[0] * np.sqrt(s[0])).reshape(r, r)
        phase = np.trace(a) / abs(np.trace(a))
        factors.append(hermitian_part(a / phase))
        rest = hermitian_part(b * phase)
    factors.append(rest)

    norms = [np.max(np.abs(np.linalg.eigvalsh(f))) for f in factors]
    residue = float(np.prod(norms))
    factors = [f / n for f, n in zip(factors, norms)]
    factors[0] = factors[0] * residue
    return ProductTest(True, tuple(factors))


@dataclass(frozen=True)
class FairSamplingDecomposition:
    filters: tuple[np.ndarray, ...]
    """One filter per incoming edge, ascending source order."""
    conclusive: PartyPOVM
    """Filtered always-conclusive measurement, completed to the identity."""
    support_projectors: tuple[np.ndarray, ...]


def decompose(povm: PartyPOVM, edge_dims: Sequence[int], tol: float = PRODUCT_TOL) -> FairSamplingDecomposition:
    """Fair-sampling decomposition of one party's measurement.

    Raises :class:`NotFairSamplingError` if the conclusive element is not a
    product. Filtered elements are ``S M^a S`` with ``S`` the pseudo-inverse
    square root of the conclusive element; the complement of its support is
    added to the first conclusive label so the result is a full POVM.
    """
    labels = povm.conclusive_labels()
    if not labels:
        raise ModelError("party has no conclusive outcome")
    mc = povm.conclusive_element()
    if np.max(np.abs(np.linalg.eigvalsh(mc))) <= BLOCKED_TOL:
        raise ModelError("party never produces a conclusive outcome (conclusive element is 0)")
    test = product_test(mc, edge_dims, tol)
    if not test.is_product:
        raise NotFairSamplingError(
            f"conclusive element is entangled across edge {test.failed_edge} "
            f"(second singular value {test.second_singular_value:.3g}); the detection loophole is open"
        )
    s = psd_power(mc, -0.5)
    proj = support_projector(mc)
    elems = [hermitian_part(s @ povm[lab] @ s) for lab in labels]
    elems[0] = elems[0] + (np.eye(mc.shape[0]) - proj)
    return FairSamplingDecomposition(
        test.factors,
        PartyPOVM(labels, tuple(elems)),
        tuple(support_projector(f) for f in test.factors),
    )


def is_fair_sampling(model: QuantumNetworkModel, tol: float = PRODUCT_TOL) -> list[bool]:
    out = []
    for j, povm in enumerate(model.povms):
        res = product_test(povm.conclusive_element(), model.edge_dims(j), tol)
        out.append(res.is_product)
    return out


@dataclass(frozen=True)
class PostselectResult:
    model: QuantumNetworkModel
    success_norms: tuple[float, ...]
    """Per-source ``||(sqrt T (x) sqrt T) psi||^2``; their product is P[all conclusive]."""
    decompositions: tuple[FairSamplingDecomposition, ...]


def postselect_transform(model: QuantumNetworkModel, tol: float = PRODUCT_TOL) -> PostselectResult:
    """Model on the same network reproducing the all-conclusive post-selected statistics."""
    g = model.graph
    decs = tuple(decompose(p, model.edge_dims(j), tol) for j, p in enumerate(model.povms))
    states = []
    norms = []
    for i, st in enumerate(model.states):
        left, right = g.parties_of(i)
        t_left = decs[left].filters[g.sources_of(left).index(i)]
        t_right = decs[right].filters[g.sources_of(right).index(i)]
        psi = psd_power(t_left, 0.5) @ st.matrix @ psd_power(t_right, 0.5).T
        n2 = float(np.vdot(psi, psi).real)
        if n2 < BLOCKED_TOL:
            raise ModelError(f"source {i} is fully blocked by the filters")
        norms.append(n2)
        states.append(SourceState.from_matrix(psi / np.sqrt(n2)))
    filtered = QuantumNetworkModel(g, tuple(states), tuple(d.conclusive for d in decs), model.dim_cap)
    return PostselectResult(filtered, tuple(norms), decs)


def filter_product(filters: Sequence[np.ndarray]) -> np.ndarray:
    return kron_all(filters)

