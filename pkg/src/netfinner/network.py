"""Network structure: sources, parties and their incidence.

A network is a bipartite graph between ``N`` independent sources and ``M``
parties, stored as a dense ``N x M`` 0/1 incidence matrix. Row ``i`` lists the
parties fed by source ``i``; parties and sources are 0-based integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import NetworkError


@dataclass(frozen=True)
class NetworkGraph:
    incidence: np.ndarray
    metadata: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        inc = np.asarray(self.incidence, dtype=np.int8)
        if inc.ndim != 2:
            raise NetworkError("incidence must be a 2-d matrix")
        if not np.isin(inc, (0, 1)).all():
            raise NetworkError("incidence entries must be 0 or 1")
        inc = inc.copy()
        inc.setflags(write=False)
        object.__setattr__(self, "incidence", inc)

    @classmethod
    def from_sources(
        cls,
        sources: Sequence[Sequence[int]],
        n_parties: int,
        metadata: Mapping[str, Any] | None = None,
    ) -> "NetworkGraph":
        """Build from a list of party-index lists, one per source."""
        inc = np.zeros((len(sources), n_parties), dtype=np.int8)
        for i, parties in enumerate(sources):
            for j in parties:
                if not 0 <= j < n_parties:
                    raise NetworkError(f"source {i} references unknown party {j}")
                inc[i, j] = 1
        return cls(inc, dict(metadata or {}))

    @classmethod
    def triangle(cls) -> "NetworkGraph":
        return cls.from_sources([[0, 1], [1, 2], [0, 2]], 3)

    @classmethod
    def cycle(cls, n: int) -> "NetworkGraph":
        return cls.from_sources([[k, (k + 1) % n] for k in range(n)], n)

    @property
    def n_sources(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_parties(self) -> int:
        return self.incidence.shape[1]

    @property
    def bipartite_sources(self) -> bool:
        return bool(self.n_sources) and bool((self.incidence.sum(axis=1) == 2).all())

    def parties_of(self, source: int) -> tuple[int, ...]:
        """Parties fed by ``source``, ascending."""
        return tuple(int(j) for j in np.flatnonzero(self.incidence[source]))

    def sources_of(self, party: int) -> tuple[int, ...]:
        """Sources feeding ``party``, ascending (this is the party's edge order)."""
        return tuple(int(i) for i in np.flatnonzero(self.incidence[:, party]))

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.incidence))]

    def source_lists(self) -> list[list[int]]:
        return [list(self.parties_of(i)) for i in range(self.n_sources)]

    def require_bipartite(self) -> None:
        if not self.bipartite_sources:
            raise NetworkError(
                "operation requires bipartite sources (every source feeds exactly two parties); "
                "hyperedge sources are only supported by the classical model"
            )


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    bipartite_sources: bool

    @property
    def valid(self) -> bool:
        return not self.violations


def validate(graph: NetworkGraph) -> ValidationReport:
    """List every violated structural assumption of ``graph``."""
    inc = graph.incidence
    problems: list[str] = []
    if graph.n_sources == 0 or graph.n_parties == 0:
        problems.append("network has no sources or no parties")
    for i in np.flatnonzero(inc.sum(axis=1) == 0):
        problems.append(f"source {i} feeds no party")
    for j in np.flatnonzero(inc.sum(axis=0) == 0):
        problems.append(f"party {j} receives no source")
    rows = [frozenset(np.flatnonzero(r)) for r in inc]
    for a in range(len(rows)):
        for b in range(len(rows)):
            if a == b or not rows[a]:
                continue
            # duplicates are reported once, on the later row
            if rows[a] == rows[b] and a < b:
                continue
            if rows[a] <= rows[b]:
                problems.append(f"source {a} is redundant: its parties are covered by source {b}")
                break
    return ValidationReport(tuple(problems), graph.bipartite_sources)


def dress_inputs(n_settings_per_party: Sequence[int]) -> NetworkGraph:
    """Network without inputs equivalent to a Bell scenario with local settings.

    Measuring parties are ``0..k-1`` and share one source. Each of them gets an
    extra local-randomness source which also feeds a new announcing party
    ``k + j`` that publishes the setting.
    """
    k = len(n_settings_per_party)
    if k == 0:
        raise NetworkError("need at least one measuring party")
    for j, s in enumerate(n_settings_per_party):
        if int(s) < 1:
            raise NetworkError(f"party {j} has no measurement setting")
    sources = [list(range(k))] + [[j, k + j] for j in range(k)]
    meta = {
        "n_settings": [int(s) for s in n_settings_per_party],
        "measuring_parties": list(range(k)),
        "announcing_parties": list(range(k, 2 * k)),
    }
    return NetworkGraph.from_sources(sources, 2 * k, meta)


@dataclass(frozen=True)
class FractionalIndependentSet:
    """Per-party weights with every source's incident weights summing to at most one.

    ``perfect`` means every per-source sum equals one. The weights condition is
    read per source, which is what makes ``x_j = 1/2`` perfect on any graph.
    """

    weights: tuple[float, ...]
    perfect: bool

    @classmethod
    def for_graph(cls, graph: NetworkGraph, weights: Sequence[float], tol: float = 1e-12):
        w = np.asarray(weights, dtype=float)
        if w.shape != (graph.n_parties,):
            raise NetworkError("one weight per party required")
        if ((w < -tol) | (w > 1 + tol)).any():
            raise NetworkError("weights must lie in [0, 1]")
        sums = graph.incidence @ w
        if (sums > 1 + tol).any():
            bad = int(np.argmax(sums))
            raise NetworkError(f"source {bad} has incident weight {sums[bad]:.6g} > 1")
        perfect = bool(np.all(np.abs(sums - 1) <= tol))
        return cls(tuple(float(x) for x in w), perfect)


def half_weights(graph: NetworkGraph) -> FractionalIndependentSet:
    graph.require_bipartite()
    return FractionalIndependentSet.for_graph(graph, [0.5] * graph.n_parties)
