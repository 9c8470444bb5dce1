"""Local-variable network models with exact enumeration.

Sources emit independent finite random variables; each party applies a
deterministic response to the tuple of values it receives (ascending source
order). Hyperedge sources are allowed here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .distribution import FAIL, OutcomeDistribution
from .errors import ModelError
from .finner import FinnerReport
from .network import FractionalIndependentSet, NetworkGraph

ENUM_CAP = 10**7
TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ClassicalNetworkModel:
    graph: NetworkGraph
    source_dists: tuple[np.ndarray, ...]
    responses: tuple[np.ndarray, ...]
    """``responses[j]`` has one axis per source feeding party ``j`` (ascending)."""

    def __post_init__(self) -> None:
        g = self.graph
        dists = tuple(np.asarray(p, dtype=float) for p in self.source_dists)
        if len(dists) != g.n_sources:
            raise ModelError("one distribution per source required")
        for i, p in enumerate(dists):
            if p.ndim != 1 or p.size == 0:
                raise ModelError(f"source {i} distribution must be a nonempty vector")
            if p.min() < 0 or abs(p.sum() - 1) > 1e-12:
                raise ModelError(f"source {i} distribution is not normalized")
        resp = tuple(np.asarray(r) for r in self.responses)
        if len(resp) != g.n_parties:
            raise ModelError("one response table per party required")
        for j, r in enumerate(resp):
            want = tuple(dists[i].size for i in g.sources_of(j))
            if r.shape != want:
                raise ModelError(f"party {j} response table has shape {r.shape}, expected {want}")
        n = int(np.prod([p.size for p in dists]))
        if n > ENUM_CAP:
            raise ModelError(f"{n} source-value combinations exceed the enumeration cap {ENUM_CAP}")
        object.__setattr__(self, "source_dists", dists)
        object.__setattr__(self, "responses", resp)

    @property
    def alphabet_sizes(self) -> tuple[int, ...]:
        return tuple(p.size for p in self.source_dists)

    def joint_source_weights(self, sources: Sequence[int] | None = None) -> np.ndarray:
        sources = range(self.graph.n_sources) if sources is None else sources
        w = np.ones(())
        for i in sources:
            w = np.multiply.outer(w, self.source_dists[i])
        return w

    def broadcast(self, party: int, table: np.ndarray | None = None) -> np.ndarray:
        """Party table reshaped to broadcast against the full source-value grid."""
        table = self.responses[party] if table is None else table
        shape = [1] * self.graph.n_sources
        for i in self.graph.sources_of(party):
            shape[i] = self.alphabet_sizes[i]
        return table.reshape(shape)


def _abs_real(table: np.ndarray) -> np.ndarray:
    try:
        return np.abs(table.astype(float))
    except (TypeError, ValueError) as exc:
        raise ModelError("response table is not real-valued") from exc


def expect_product(
    model: ClassicalNetworkModel, weights: FractionalIndependentSet
) -> tuple[float, float]:
    """``(E[prod_j |f_j|], prod_j ||f_j||_{1/x_j})`` by exact enumeration.

    A zero weight uses the essential supremum of ``|f_j|``.
    """
    g = model.graph
    x = np.asarray(weights.weights)
    if x.size != g.n_parties:
        raise ModelError("one weight per party required")
    w = model.joint_source_weights()
    prod = np.ones_like(w)
    for j in range(g.n_parties):
        prod = prod * model.broadcast(j, _abs_real(model.responses[j]))
    lhs = float(np.sum(w * prod))
    rhs = 1.0
    for j in range(g.n_parties):
        f = _abs_real(model.responses[j])
        wj = model.joint_source_weights(g.sources_of(j))
        top = float(f[wj > 0].max(initial=0.0))
        if x[j] == 0 or top == 0.0:
            rhs *= top
        else:
            # factor out the sup so small weights do not overflow the power
            rhs *= top * float(np.sum(wj * (f / top) ** (1.0 / x[j]))) ** x[j]
    return lhs, rhs


def output_alphabets(model: ClassicalNetworkModel) -> tuple[tuple[Hashable, ...], ...]:
    """Labels in order of first appearance; the failure label, if present, goes last."""
    out = []
    for r in model.responses:
        seen: list[Hashable] = []
        for v in r.reshape(-1).tolist():
            if v not in seen:
                seen.append(v)
        if FAIL in seen:
            seen.remove(FAIL)
            seen.append(FAIL)
        out.append(tuple(seen))
    return tuple(out)


def output_distribution(
    model: ClassicalNetworkModel,
    alphabets: Sequence[Sequence[Hashable]] | None = None,
) -> OutcomeDistribution:
    """Exact joint distribution of the party outputs."""
    g = model.graph
    alphabets = output_alphabets(model) if alphabets is None else tuple(map(tuple, alphabets))
    onehots = []
    for j in range(g.n_parties):
        r = model.responses[j]
        try:
            idx = [alphabets[j].index(v) for v in r.reshape(-1).tolist()]
        except ValueError as exc:
            raise ModelError(f"party {j} outputs a label outside its alphabet") from exc
        onehots.append(model.broadcast(j, np.asarray(idx, dtype=np.intp).reshape(r.shape)))
    probs = np.zeros(tuple(len(a) for a in alphabets))
    full = np.broadcast_arrays(model.joint_source_weights(), *onehots)
    np.add.at(probs, tuple(o.reshape(-1) for o in full[1:]), full[0].reshape(-1))
    return OutcomeDistribution(alphabets, probs, g)


def _event_indicator(model: ClassicalNetworkModel, party: int, target) -> np.ndarray:
    r = model.responses[party]
    if isinstance(target, (set, frozenset, list, tuple)):
        allowed = set(target)
    else:
        allowed = {target}
    flat = [v in allowed for v in r.reshape(-1).tolist()]
    return np.asarray(flat, dtype=float).reshape(r.shape)


def finner_probability_check(
    model: ClassicalNetworkModel,
    targets: Sequence,
    weights: FractionalIndependentSet,
    tol: float = TOL,
) -> FinnerReport:
    """``P(a_1..a_M) <= prod_j P_j(a_j)^{x_j}`` for the target event.

    Each target entry is one label or a collection of labels (an event).
    """
    g = model.graph
    if len(targets) != g.n_parties:
        raise ModelError("one target per party required")
    ind = [_event_indicator(model, j, t) for j, t in enumerate(targets)]
    w = model.joint_source_weights()
    prod = np.ones_like(w)
    for j in range(g.n_parties):
        prod = prod * model.broadcast(j, ind[j])
    lhs = float(np.sum(w * prod))
    marg = []
    rhs = 1.0
    for j in range(g.n_parties):
        pj = float(np.sum(model.joint_source_weights(g.sources_of(j)) * ind[j]))
        marg.append(pj)
        rhs *= pj ** weights.weights[j] if weights.weights[j] > 0 else float(pj > 0)
    return FinnerReport.build(lhs, rhs, tuple(marg), None, tol)


@dataclass(frozen=True)
class StructureReport:
    factors: bool
    indicators: tuple[np.ndarray, ...] | None
    """Per-source 0/1 vectors over the source alphabet when the responses factor."""
    counterexample: tuple[int, tuple[int, ...]] | None
    """``(party, source-value tuple)`` where the product identity fails."""


def equality_structure_check(
    model: ClassicalNetworkModel, weights: FractionalIndependentSet
) -> StructureReport:
    """Test whether every 0/1 response is a product of shared per-source indicators.

    The candidate indicator of source ``i`` marks the values that occur in some
    positive-probability assignment where every party outputs 1.
    """
    if not weights.perfect:
        raise ModelError("the equality structure is only defined for perfect weights")
    g = model.graph
    for j, r in enumerate(model.responses):
        vals = _abs_real(r)
        if not np.isin(vals, (0.0, 1.0)).all() or (r.astype(float) < 0).any():
            raise ModelError(f"party {j} response is not an indicator function")
    w = model.joint_source_weights()
    all_one = np.ones(w.shape, dtype=bool) & (w > 0)
    for j in range(g.n_parties):
        all_one = all_one & (model.broadcast(j, model.responses[j].astype(float)) == 1)
    phis = []
    for i in range(g.n_sources):
        other = tuple(k for k in range(g.n_sources) if k != i)
        phis.append(all_one.any(axis=other).astype(int) if other else all_one.astype(int))
    for j in range(g.n_parties):
        srcs = g.sources_of(j)
        pred = np.ones((), dtype=int)
        for i in srcs:
            pred = np.multiply.outer(pred, phis[i])
        diff = model.responses[j].astype(int) != pred
        marg_support = model.joint_source_weights(srcs) > 0
        bad = np.argwhere(diff & marg_support)
        if bad.size:
            local = tuple(int(v) for v in bad[0])
            full = [0] * g.n_sources
            for i, v in zip(srcs, local):
                full[i] = v
            return StructureReport(False, None, (j, tuple(full)))
    return StructureReport(True, tuple(phis), None)


def sample_product_expectation(
    model: ClassicalNetworkModel, n_samples: int, seed: int
) -> float:
    """Seeded Monte-Carlo estimate of ``E[prod_j |f_j|]``; a cross-check only."""
    rng = np.random.default_rng(seed)
    g = model.graph
    draws = [rng.choice(p.size, size=n_samples, p=p) for p in model.source_dists]
    prod = np.ones(n_samples)
    for j in range(g.n_parties):
        idx = tuple(draws[i] for i in g.sources_of(j))
        prod *= _abs_real(model.responses[j])[idx]
    return float(prod.mean())
