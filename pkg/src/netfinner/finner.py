"""Finner inequality on bipartite-source networks, its saturation and rigidity.

For every quantum or classical model on a graph network,

    P[all parties conclusive] <= sqrt(prod_j P[a_j conclusive]),

and equality forces the failing-source structure: conclusive elements are
product projectors diagonal in the Schmidt bases, with the same projector on
both ends of every source.
"""

from __future__ import annotations

import string
from dataclasses import asdict, dataclass
from typing import Hashable, Sequence

import numpy as np

from .distribution import OutcomeDistribution, all_conclusive_probability
from .errors import ModelError
from .fairsampling import product_test
from .linalg import dagger, hermitian_part, kron_all, psd_power
from .network import NetworkGraph
from .quantum import QuantumNetworkModel, joint_distribution

SATURATION_TOL = 1e-9
OPTIMIZER_SATURATION_TOL = 1e-6
SUPPORT_CUTOFF = 1e-12


@dataclass(frozen=True)
class FinnerReport:
    lhs: float
    rhs: float
    slack: float
    saturated: bool
    marginals: tuple[float, ...]
    implied_e: tuple[float | None, ...] | None = None
    """Per-source failure probability implied by the marginals; None where undefined."""

    @classmethod
    def build(cls, lhs, rhs, marginals, implied_e, tol) -> "FinnerReport":
        slack = rhs - lhs
        return cls(float(lhs), float(rhs), float(slack), bool(abs(slack) <= tol), tuple(marginals), implied_e)

    def to_dict(self) -> dict:
        return asdict(self)


def finner_check(dist: OutcomeDistribution, graph: NetworkGraph, tol: float = SATURATION_TOL) -> FinnerReport:
    """Compare P[all conclusive] with the square root of the product of marginals."""
    graph.require_bipartite()
    if graph.n_parties != dist.n_parties:
        raise ModelError("distribution and graph disagree on the number of parties")
    marg = tuple(all_conclusive_probability(dist, [j]) for j in range(dist.n_parties))
    lhs = all_conclusive_probability(dist)
    rhs = float(np.sqrt(np.prod(marg)))
    implied: list[float | None] = []
    for i in range(graph.n_sources):
        j, k = graph.parties_of(i)
        both = all_conclusive_probability(dist, [j, k])
        implied.append(None if both <= 0.0 else 1.0 - marg[j] * marg[k] / both)
    return FinnerReport.build(lhs, rhs, marg, tuple(implied), tol)


# --- support-restricted operators in Schmidt coordinates ---------------------------


def _edge_isometry(model: QuantumNetworkModel, source: int, party: int) -> np.ndarray:
    """Columns: the Schmidt vectors of ``source`` on the ``party`` side (support only)."""
    sch = model.states[source].schmidt
    basis = sch.left if model.side(source, party) == 0 else sch.right
    return basis[:, : sch.rank]


def party_isometry(model: QuantumNetworkModel, party: int) -> np.ndarray:
    return kron_all([_edge_isometry(model, i, party) for i in model.graph.sources_of(party)])


def restricted_conclusive(
    model: QuantumNetworkModel, party: int, labels: Sequence[Hashable] | None = None
) -> np.ndarray:
    """Conclusive element compressed to the support of the party's marginal state.

    Coordinates are the product of Schmidt bases of the incoming sources.
    """
    w = party_isometry(model, party)
    return hermitian_part(dagger(w) @ model.povms[party].conclusive_element(labels) @ w)


def _restricted_rho(model: QuantumNetworkModel, party: int) -> np.ndarray:
    lam2 = [model.states[i].schmidt.coefficients ** 2 for i in model.graph.sources_of(party)]
    diag = np.ones(1)
    for v in lam2:
        diag = np.kron(diag, v)
    return np.diag(diag).astype(complex)


@dataclass(frozen=True)
class RigidityVerdict:
    conclusive_element_is_projector: tuple[bool, ...]
    commutes_with_marginal: tuple[bool, ...]
    factorizes_over_edges: tuple[bool, ...]
    matching_projectors: tuple[bool, ...]
    implied_e_consistent: tuple[bool, ...]
    schmidt_e: tuple[float | None, ...]
    """Per-source ``1 - sum_l lambda_l^2 chi(l)`` from the recovered projectors."""
    finner: FinnerReport

    @property
    def rigid(self) -> bool:
        flags = (
            self.conclusive_element_is_projector
            + self.commutes_with_marginal
            + self.factorizes_over_edges
            + self.matching_projectors
            + self.implied_e_consistent
        )
        return all(flags)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rigid"] = self.rigid
        return d


def rigidity_verify(model: QuantumNetworkModel, tol: float = SATURATION_TOL) -> RigidityVerdict:
    """Check the failing-source structure that saturation of the inequality forces.

    Per party, on the support of its marginal state: the conclusive element is
    a projector, commutes with the marginal, and is a product over edges. Per
    source: the two end projectors act identically on the state, and the
    failure probability they imply matches the one read off the statistics.
    """
    g = model.graph
    g.require_bipartite()
    is_proj, commutes, factorizes = [], [], []
    edge_proj: dict[tuple[int, int], np.ndarray] = {}
    for j in range(g.n_parties):
        m = restricted_conclusive(model, j)
        rho = _restricted_rho(model, j)
        is_proj.append(bool(np.max(np.abs(m @ m - m), initial=0.0) <= tol))
        commutes.append(bool(np.max(np.abs(rho @ m - m @ rho), initial=0.0) <= tol))
        dims = [model.states[i].schmidt.rank for i in g.sources_of(j)]
        test = product_test(m, dims, tol=max(tol, 1e-12))
        factorizes.append(test.is_product)
        if test.is_product:
            for i, f in zip(g.sources_of(j), test.factors):
                edge_proj[(i, j)] = f

    matching, consistent, schmidt_e = [], [], []
    finner = finner_check(joint_distribution(model), g, tol)
    for i in range(g.n_sources):
        left, right = g.parties_of(i)
        lam = model.states[i].schmidt.coefficients
        a = edge_proj.get((i, left))
        b = edge_proj.get((i, right))
        if a is None or b is None:
            matching.append(False)
            consistent.append(False)
            schmidt_e.append(None)
            continue
        # projectors agree on the state iff A Lambda = Lambda B^T in Schmidt coordinates
        lam_m = np.diag(lam)
        matching.append(bool(np.max(np.abs(a @ lam_m - lam_m @ b.T)) <= tol))
        p = float(np.real(np.sum(lam**2 * np.diag(a))))
        schmidt_e.append(1.0 - p)
        implied = finner.implied_e[i]
        if implied is None:
            consistent.append(p <= tol)
        else:
            # the implied value is a ratio of probabilities, so its error grows like tol / p
            consistent.append(abs(implied - (1.0 - p)) <= tol * (1.0 + 1.0 / max(p, tol)))
    return RigidityVerdict(
        tuple(is_proj),
        tuple(commutes),
        tuple(factorizes),
        tuple(matching),
        tuple(consistent),
        tuple(schmidt_e),
        finner,
    )


# --- the local-variable g-model behind the quantum inequality ----------------------


@dataclass(frozen=True)
class GOracleReport:
    p_all: float
    """P[all parties in their target sets], computed from the model directly."""
    signed_sum: complex
    """``sum prod_i lambda lambda' prod_j <l_j|M_j|l'_j>`` (equals p_all)."""
    expect_product_g: float
    """``E[prod_j g_j]`` in the g-model."""
    phase_aligned: bool
    expect_g_squared: tuple[float, ...]
    tr_sqrt_rho_m_sqrt_rho_m: tuple[float, ...]
    tr_rho_m_squared: tuple[float, ...]
    tr_rho_m: tuple[float, ...]
    chain: tuple[float, ...]
    """``(p_all, E[prod g], sqrt prod E[g^2], sqrt prod tr rho M^2, sqrt prod tr rho M)``."""
    links_hold: tuple[bool, ...]
    links_tight: tuple[bool, ...]
    identity_errors: tuple[float, ...]
    """Per party ``|E[g_j^2] - tr sqrt(rho) M sqrt(rho) M|``."""

    @property
    def chain_holds(self) -> bool:
        return all(self.links_hold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["signed_sum"] = [self.signed_sum.real, self.signed_sum.imag]
        return d


def _letters(n: int) -> list[str]:
    pool = string.ascii_letters
    if 2 * n > len(pool):
        raise ModelError("too many sources for the g-oracle contraction")
    return list(pool[: 2 * n])


def g_oracle(
    model: QuantumNetworkModel,
    targets: Sequence[Sequence[Hashable] | None] | None = None,
    tol: float = 1e-10,
) -> GOracleReport:
    """Build the g-model of a quantum model and evaluate the Finner proof chain.

    Each source draws two independent uniform Schmidt indices ``(l, l')``;
    party ``j`` outputs ``g_j = prod_i d_i sqrt(lambda_l lambda_l') |<l_j|M_j|l'_j>|``.
    The chain ``p_all <= E[prod g] <= sqrt prod E[g^2] <= sqrt prod tr rho M^2
    <= sqrt prod tr rho M`` is evaluated exactly and each link is checked.
    """
    g = model.graph
    g.require_bipartite()
    n = g.n_sources
    targets = [None] * g.n_parties if targets is None else list(targets)
    letters = _letters(n)
    lam = [model.states[i].schmidt.coefficients for i in range(n)]
    d = [len(v) for v in lam]

    m_ops = []
    tensors_abs, tensors_signed = [], []
    e_g2, tr_srms, tr_rm2, tr_rm = [], [], [], []
    for j in range(g.n_parties):
        srcs = g.sources_of(j)
        m = restricted_conclusive(model, j, targets[j])
        m_ops.append(m)
        dims = [d[i] for i in srcs]
        # M as tensor with axes (l_i for i in srcs) + (l'_i for i in srcs)
        mt = m.reshape(dims + dims)
        weight = np.ones(())
        for i in srcs:
            weight = np.multiply.outer(weight, np.sqrt(lam[i]))
        w2 = np.multiply.outer(weight, weight)
        scale = float(np.prod(dims))
        gj = scale * w2 * np.abs(mt)
        tensors_abs.append(gj)
        tensors_signed.append(w2 * mt)
        # E[g_j^2]: the indices of sources away from j average out
        e_g2.append(float(np.sum(gj**2) / scale**2))
        rho = _restricted_rho(model, j)
        sr = psd_power(rho, 0.5, floor=0.0)
        tr_srms.append(float(np.real(np.trace(sr @ m @ sr @ m))))
        tr_rm2.append(float(np.real(np.trace(rho @ m @ m))))
        tr_rm.append(float(np.real(np.trace(rho @ m))))

    subs, ops_abs, ops_signed = [], [], []
    for j in range(g.n_parties):
        srcs = g.sources_of(j)
        subs.append("".join(letters[2 * i] for i in srcs) + "".join(letters[2 * i + 1] for i in srcs))
        ops_abs.append(tensors_abs[j])
        ops_signed.append(tensors_signed[j])
    expr = ",".join(subs) + "->"
    norm = float(np.prod([di**2 for di in d]))
    expect_prod = float(np.einsum(expr, *ops_abs, optimize=True)) / norm
    signed = complex(np.einsum(expr, *ops_signed, optimize=True))

    p_all = _target_probability(model, targets)
    chain = (
        p_all,
        expect_prod,
        float(np.sqrt(np.prod(e_g2))),
        float(np.sqrt(np.prod(tr_rm2))),
        float(np.sqrt(np.prod(tr_rm))),
    )
    hold = tuple(bool(chain[k] <= chain[k + 1] + tol) for k in range(4))
    tight = tuple(bool(abs(chain[k + 1] - chain[k]) <= tol) for k in range(4))
    return GOracleReport(
        p_all=p_all,
        signed_sum=signed,
        expect_product_g=expect_prod,
        phase_aligned=bool(abs(abs(signed) - expect_prod) <= tol),
        expect_g_squared=tuple(e_g2),
        tr_sqrt_rho_m_sqrt_rho_m=tuple(tr_srms),
        tr_rho_m_squared=tuple(tr_rm2),
        tr_rho_m=tuple(tr_rm),
        chain=chain,
        links_hold=hold,
        links_tight=tight,
        identity_errors=tuple(abs(a - b) for a, b in zip(e_g2, tr_srms)),
    )


def _target_probability(model: QuantumNetworkModel, targets) -> float:
    dist = joint_distribution(model)
    table = dist.probabilities
    for j, povm in enumerate(model.povms):
        labels = povm.conclusive_labels() if targets[j] is None else tuple(targets[j])
        mask = np.array([lab in labels for lab in dist.alphabets[j]])
        table = np.compress(mask, table, axis=j)
    return float(table.sum())
