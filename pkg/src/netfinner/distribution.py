"""Exact joint output distributions over network parties."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterator, Sequence

import numpy as np

from .errors import DistributionError
from .network import NetworkGraph

FAIL = "∅"
"""The inconclusive (failure) outcome label."""

NEG_TOL = 1e-12
SUM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Dense probability table; axis ``j`` is indexed by ``alphabets[j]``."""

    alphabets: tuple[tuple[Hashable, ...], ...]
    probabilities: np.ndarray
    graph: NetworkGraph | None = None

    def __post_init__(self) -> None:
        alph = tuple(tuple(a) for a in self.alphabets)
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != tuple(len(a) for a in alph):
            raise DistributionError(
                f"table shape {p.shape} does not match alphabet sizes {[len(a) for a in alph]}"
            )
        for a in alph:
            if len(set(a)) != len(a):
                raise DistributionError(f"duplicate outcome labels in {a}")
        if p.size and p.min() < -NEG_TOL:
            raise DistributionError(f"negative probability {p.min():.3g}")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise DistributionError(f"probabilities sum to {p.sum():.12g}, not 1")
        if self.graph is not None and self.graph.n_parties != len(alph):
            raise DistributionError("one alphabet per graph party required")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "alphabets", alph)
        object.__setattr__(self, "probabilities", p)

    @property
    def n_parties(self) -> int:
        return len(self.alphabets)

    def index(self, outcome: Sequence[Hashable]) -> tuple[int, ...]:
        try:
            return tuple(a.index(o) for a, o in zip(self.alphabets, outcome, strict=True))
        except ValueError as exc:
            raise DistributionError(f"unknown outcome in {tuple(outcome)}") from exc

    def __getitem__(self, outcome: Sequence[Hashable]) -> float:
        return float(self.probabilities[self.index(outcome)])

    def items(self) -> Iterator[tuple[tuple[Hashable, ...], float]]:
        for idx in np.ndindex(*self.probabilities.shape):
            yield tuple(a[i] for a, i in zip(self.alphabets, idx)), float(self.probabilities[idx])

    def clamped(self) -> np.ndarray:
        """Table with tiny negative round-off set to zero (used on export)."""
        return np.clip(self.probabilities, 0.0, None)

    def conclusive_mask(self, party: int) -> np.ndarray:
        """Boolean vector over the party's alphabet, False exactly at the failure label."""
        return np.array([lab != FAIL for lab in self.alphabets[party]])

    def has_failures(self) -> bool:
        return any(FAIL in a for a in self.alphabets)

    def allclose(self, other: "OutcomeDistribution", atol: float) -> bool:
        if self.alphabets != other.alphabets:
            return False
        return bool(np.max(np.abs(self.probabilities - other.probabilities), initial=0.0) <= atol)

    def max_abs_diff(self, other: "OutcomeDistribution") -> float:
        if self.alphabets != other.alphabets:
            raise DistributionError("alphabets differ")
        return float(np.max(np.abs(self.probabilities - other.probabilities), initial=0.0))


def product_distribution(
    marginals: Sequence[Sequence[float]],
    alphabets: Sequence[Sequence[Hashable]] | None = None,
) -> OutcomeDistribution:
    table = np.ones(())
    for m in marginals:
        table = np.multiply.outer(table, np.asarray(m, dtype=float))
    if alphabets is None:
        alphabets = [tuple(range(len(m))) for m in marginals]
    return OutcomeDistribution(tuple(map(tuple, alphabets)), table)


def marginal(dist: OutcomeDistribution, parties: Sequence[int]) -> OutcomeDistribution:
    """Distribution of ``parties`` (kept in ascending order); the rest are summed out."""
    keep = sorted(set(int(j) for j in parties))
    if not keep:
        raise DistributionError("marginal needs at least one party")
    if keep[0] < 0 or keep[-1] >= dist.n_parties:
        raise DistributionError(f"party index out of range in {list(parties)}")
    drop = tuple(j for j in range(dist.n_parties) if j not in keep)
    table = dist.probabilities.sum(axis=drop) if drop else dist.probabilities
    return OutcomeDistribution(tuple(dist.alphabets[j] for j in keep), table)


def all_conclusive_probability(dist: OutcomeDistribution, parties: Sequence[int] | None = None) -> float:
    """``P[a_j != FAIL for every j in parties]`` (all parties by default)."""
    parties = range(dist.n_parties) if parties is None else parties
    table = dist.probabilities
    for j in parties:
        table = np.compress(dist.conclusive_mask(j), table, axis=j)
    return float(table.sum())


def conditional_on_conclusive(dist: OutcomeDistribution) -> tuple[OutcomeDistribution, float]:
    """Post-select on every party being conclusive.

    Returns the renormalized distribution over conclusive labels and the
    success probability. Parties without a failure label are always conclusive.
    """
    table = dist.probabilities
    alphabets = []
    for j in range(dist.n_parties):
        mask = dist.conclusive_mask(j)
        table = np.compress(mask, table, axis=j)
        alphabets.append(tuple(a for a, m in zip(dist.alphabets[j], mask) if m))
    success = float(table.sum())
    if success <= 0.0:
        raise DistributionError("no all-conclusive mass to condition on")
    return OutcomeDistribution(tuple(alphabets), table / success, dist.graph), success
