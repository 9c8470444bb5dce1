"""The RGB4 triangle distribution and its failure-scaled randomness bound.

Parties sit on a triangle; source ``s_j`` joins party ``j`` and ``j+1``
(mod 3) and emits ``(|01> + |10>)/sqrt(2)``. Each party measures its two
qubits, ordered (qubit from the previous party's source, qubit from the
next party's source), in the basis ``|00>, u_i|01> + v_i|10>, |11>``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .distribution import OutcomeDistribution, conditional_on_conclusive
from .errors import ModelError
from .failing import _coerce, overlay_distribution
from .finner import SATURATION_TOL, finner_check
from .linalg import permute_subsystems
from .network import NetworkGraph
from .quantum import PartyPOVM, QuantumNetworkModel, SourceState, joint_distribution

LABELS = ("0", "1_0", "1_1", "2")
ENTRY_TOL = 1e-12
THETA_MAX = math.pi / 4


@dataclass(frozen=True)
class RGB4Params:
    theta: float

    def __post_init__(self) -> None:
        if not -1e-15 <= self.theta <= THETA_MAX + 1e-15:
            raise ModelError(f"theta={self.theta} outside [0, pi/4]")

    @property
    def u(self) -> tuple[float, float]:
        return (math.cos(self.theta), math.sin(self.theta))

    @property
    def v(self) -> tuple[float, float]:
        return (math.sin(self.theta), -math.cos(self.theta))


def _graph() -> NetworkGraph:
    # sources in cyclic order: (0,1), (1,2), (2,0)
    return NetworkGraph.from_sources([[0, 1], [1, 2], [0, 2]], 3)


def rgb4_realization(theta: float) -> QuantumNetworkModel:
    p = RGB4Params(theta)
    g = _graph()
    singlet = np.array([[0.0, 1.0], [1.0, 0.0]]) / math.sqrt(2)
    states = tuple(SourceState.from_matrix(singlet) for _ in range(3))
    vecs = [np.array([1.0, 0, 0, 0])]
    for i in range(2):
        vecs.append(np.array([0.0, p.u[i], p.v[i], 0.0]))
    vecs.append(np.array([0.0, 0, 0, 1.0]))
    basis = PartyPOVM.projective(LABELS, vecs)
    # party 0 sees its sources in ascending order (s_0, s_2) but measures (s_2, s_0)
    swapped = PartyPOVM(LABELS, tuple(permute_subsystems(m, [2, 2], [1, 0]) for m in basis.elements))
    return QuantumNetworkModel(g, states, (swapped, basis, basis))


def listed_entries(theta: float) -> dict[tuple[str, str, str], float]:
    """Closed-form entries of RGB4, including their cyclic images."""
    p = RGB4Params(theta)
    u, v = p.u, p.v
    out = {}
    for i in range(2):
        for j in range(2):
            for k in range(2):
                key = (LABELS[1 + i], LABELS[1 + j], LABELS[1 + k])
                out[key] = (u[i] * u[j] * u[k] + v[i] * v[j] * v[k]) ** 2 / 8
    for i in range(2):
        one = LABELS[1 + i]
        for shift in range(3):
            for rest, val in ((("0", "2"), u[i] ** 2 / 8), (("2", "0"), v[i] ** 2 / 8)):
                key = [one, *rest]
                key = tuple(key[(n - shift) % 3] for n in range(3))
                out[key] = val
    return out


def rgb4_distribution(theta: float) -> OutcomeDistribution:
    """RGB4 as computed from its realization; listed entries are checked against it."""
    dist = joint_distribution(rgb4_realization(theta))
    for key, val in listed_entries(theta).items():
        if abs(dist[key] - val) > ENTRY_TOL:
            raise ModelError(f"realization disagrees with RGB4 entry {key}: {dist[key]} vs {val}")
    return dist


def r_lower_bound(theta: float) -> float:
    """Coherence lower bound; raw value, may be negative."""
    s = math.sin(theta)
    return 0.5 * s**3 * (3 * math.cos(theta) + math.cos(3 * theta) - 6 * s)


def _h(p: float) -> float:
    return _shannon([p, 1 - p])


def _shannon(ps: Iterable[float]) -> float:
    return float(-sum(p * math.log2(p) for p in ps if p > 0))


def entropy_bound_L(r: float) -> float:
    """Entropy bound in bits for coherence ``r`` in ``[0, 1/4]``; negative ``r`` is clamped to 0."""
    if r > 0.25 + 1e-15:
        raise ModelError(f"r={r} exceeds 1/4")
    r = min(max(r, 0.0), 0.25)
    s = math.sqrt(4 * r)
    probs = ((1 + s) ** 2 / 4, (1 - s) ** 2 / 4, (1 - 4 * r) / 4, (1 - 4 * r) / 4)
    return 1 + _h((1 + 4 * r) / 2) - _shannon(probs)


@dataclass(frozen=True)
class RandomnessBoundReport:
    theta: float
    r_raw: float
    r: float
    L: float
    e_alpha: float
    e_beta: float
    e_gamma: float
    factor: float
    scaled: float
    naive_factor: float
    naive_scaled: float

    def to_dict(self) -> dict:
        return asdict(self)


def scaled_randomness_bound(theta: float, e_beta: float, e_gamma: float, e_alpha: float = 0.0) -> RandomnessBoundReport:
    """Entropy bound for party A with its two sources failing w.p. ``e_beta``, ``e_gamma``.

    ``naive_*`` is the weaker figure obtained by also paying for the source
    A does not touch, i.e. using the success rate of all three sources.
    """
    for name, e in (("e_alpha", e_alpha), ("e_beta", e_beta), ("e_gamma", e_gamma)):
        if not 0.0 <= e <= 1.0:
            raise ModelError(f"{name}={e} outside [0, 1]")
    r_raw = r_lower_bound(theta)
    r = max(r_raw, 0.0)
    L = entropy_bound_L(r)
    factor = (1 - e_beta) * (1 - e_gamma)
    naive = (1 - e_alpha) * factor
    return RandomnessBoundReport(theta, r_raw, r, L, e_alpha, e_beta, e_gamma, factor, factor * L, naive, naive * L)


def failing_rgb4(theta: float, e, tol: float = SATURATION_TOL) -> OutcomeDistribution:
    """RGB4 behind independently failing sources; checks saturation and the conditional."""
    e = _coerce(e)
    if len(e) != 3:
        raise ModelError("triangle needs three failure probabilities")
    ideal = rgb4_distribution(theta)
    g = _graph()
    dist = overlay_distribution(ideal, g, e)
    report = finner_check(dist, g, tol)
    if not report.saturated:
        raise ModelError(f"failing RGB4 does not saturate the Finner bound (slack {report.slack})")
    if e.success_probability() > 0:
        cond, _ = conditional_on_conclusive(dist)
        if np.max(np.abs(cond.probabilities - ideal.probabilities)) > 1e-10:
            raise ModelError("conditional on conclusive does not recover RGB4")
    return dist


@dataclass(frozen=True)
class SweepRow:
    theta: float
    r_raw: float
    L: float
    scaled: float
    naive_scaled: float


def theta_sweep(thetas: Iterable[float], e_beta: float, e_gamma: float, e_alpha: float = 0.0) -> list[SweepRow]:
    rows = []
    for t in thetas:
        rep = scaled_randomness_bound(float(t), e_beta, e_gamma, e_alpha)
        rows.append(SweepRow(rep.theta, rep.r_raw, rep.L, rep.scaled, rep.naive_scaled))
    return rows

