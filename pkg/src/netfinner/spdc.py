"""CHSH test with a polarization-entangled SPDC source and click detectors.

The source emits ``sqrt(N) exp(T1 a_h^+ b_h^+ + T2 a_v^+ b_v^+)|0>``; each
party rotates polarization, splits h/v and records a click pattern on two
non-resolving detectors. All pattern probabilities follow from the Gaussian
identity ``||exp(a^T K b^+)|0>||^2 = 1/det(1 - K^+ K)`` by inclusion-exclusion
over vacuum projectors.

Pattern order on each side is ``(h, v)`` in ``PATTERNS``; ``o`` is no click
and ``x`` a click.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .distribution import FAIL, OutcomeDistribution
from .errors import ModelError, OptimizationError
from .network import dress_inputs

PATTERNS = ("oo", "xo", "ox", "xx")
PATTERN_BITS = ((0, 0), (1, 0), (0, 1), (1, 1))
VACUUM = 0

OBJECTIVES = ("standard_chsh", "standard_randomness", "ps_randomness", "ps_chsh")
T_MAX = 0.95


@dataclass(frozen=True)
class SPDCParams:
    """Pump parameters and per-setting polarization rotations ``(theta, phi)``.

    ``*_twist`` are the third SU(2) phases. Writing a rotation as
    ``D(a) R(theta) D(b)`` with ``D(x) = diag(e^{ix}, e^{-ix})`` gives
    ``twist = a + b`` and ``phi = a - b``; only ``a`` is visible to the
    detectors, so a zero twist loses no generality (see ``detector_gauge``).
    """

    t1: float
    t2: float
    alice: tuple[tuple[float, float], tuple[float, float]]
    bob: tuple[tuple[float, float], tuple[float, float]]
    alice_twist: tuple[float, float] = (0.0, 0.0)
    bob_twist: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        for name in ("t1", "t2"):
            t = getattr(self, name)
            if not 0.0 <= t < 1.0:
                raise ModelError(f"{name}={t} outside [0, 1)")

    @classmethod
    def from_angles(cls, t1, t2, alphas, betas, phi_a=(0.0, 0.0), phi_b=(0.0, 0.0)) -> "SPDCParams":
        return cls(
            float(t1),
            float(t2),
            tuple((float(a), float(p)) for a, p in zip(alphas, phi_a)),
            tuple((float(b), float(p)) for b, p in zip(betas, phi_b)),
        )

    @property
    def success_probability(self) -> float:
        """Probability that the source emits at least one pair."""
        return 1.0 - (1.0 - self.t1**2) * (1.0 - self.t2**2)

    def to_dict(self) -> dict:
        return asdict(self)


def rotation(theta: float, phi: float, twist: float = 0.0) -> np.ndarray:
    """General SU(2) polarization rotation acting on ``(h^+, v^+)``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [c * np.exp(1j * twist), s * np.exp(1j * phi)],
            [-s * np.exp(-1j * phi), c * np.exp(-1j * twist)],
        ]
    )


def mode_matrix(params: SPDCParams, x: int, y: int) -> np.ndarray:
    """Pair-creation matrix after the rotations for settings ``(x, y)``."""
    a, pa = params.alice[x]
    b, pb = params.bob[y]
    ra = rotation(a, pa, params.alice_twist[x])
    rb = rotation(b, pb, params.bob_twist[y])
    return ra.T @ np.diag([params.t1, params.t2]) @ rb


def generating_term(m: np.ndarray, x: int, y: int, z: int, w: int) -> float:
    """``<G_x (x) G_y (x) G_z (x) G_w>`` with ``G_0`` the vacuum projector and ``G_1 = 1``.

    Modes are ``(a_h, a_v, b_h, b_v)``. The numerator ``det(1 - T^+T)`` equals
    ``det(1 - M^+M)`` because the rotations are unitary.
    """
    m = np.asarray(m, dtype=complex)
    eye = np.eye(2)
    num = np.linalg.det(eye - m.conj().T @ m).real
    den = np.linalg.det(eye - m.conj().T @ np.diag([x, y]) @ m @ np.diag([z, w])).real
    if num <= 0 or den <= 0:
        raise ModelError("pair-creation matrix outside the normalizable regime (singular value >= 1)")
    return float(num / den)


def _subsets() -> list[tuple[int, int, int, int]]:
    return list(itertools.product((0, 1), repeat=4))


def _mobius() -> np.ndarray:
    """Row = click pattern (a-pattern * 4 + b-pattern), column = generating subset."""
    subs = _subsets()
    out = np.zeros((16, 16))
    for ia, (ha, va) in enumerate(PATTERN_BITS):
        for ib, (hb, vb) in enumerate(PATTERN_BITS):
            pat = (ha, va, hb, vb)
            for k, s in enumerate(subs):
                if all(si <= pi for si, pi in zip(s, pat)):
                    out[ia * 4 + ib, k] = (-1) ** (sum(pat) - sum(s))
    return out


_SUBS = np.array(_subsets(), dtype=float)
_MOBIUS = _mobius()


def _generating_terms(ms: np.ndarray) -> np.ndarray:
    """All 16 generating terms for a stack of mode matrices, shape ``(..., 16)``."""
    mh = np.conj(np.swapaxes(ms, -1, -2))
    ax = _SUBS[:, :2]
    bz = _SUBS[:, 2:]
    # A = M^+ diag(x, y) M diag(z, w) for every subset
    inner = mh[..., None, :, :] * ax[:, None, :]  # M^+ diag(x, y)
    a = inner @ ms[..., None, :, :]
    a = a * bz[:, None, :]
    det = (1 - a[..., 0, 0]) * (1 - a[..., 1, 1]) - a[..., 0, 1] * a[..., 1, 0]
    mm = mh @ ms
    num = ((1 - mm[..., 0, 0]) * (1 - mm[..., 1, 1]) - mm[..., 0, 1] * mm[..., 1, 0]).real
    return num[..., None] / det.real


def click_tables(params: SPDCParams) -> np.ndarray:
    """Pattern probabilities for all settings, shape ``(2, 2, 4, 4)`` as ``[x, y, a, b]``."""
    ms = np.array([[mode_matrix(params, x, y) for y in range(2)] for x in range(2)])
    return _tables_from_mode_matrices(ms)


def _tables_from_mode_matrices(ms: np.ndarray) -> np.ndarray:
    g = _generating_terms(ms)
    p = g @ _MOBIUS.T
    p = p.reshape(ms.shape[:-2] + (4, 4))
    return p / p.sum(axis=(-1, -2), keepdims=True)


def click_probabilities(params: SPDCParams, x: int, y: int) -> np.ndarray:
    """4x4 block ``P(a_pattern, b_pattern | x, y)``."""
    return _tables_from_mode_matrices(mode_matrix(params, x, y)[None])[0]


# --- binning and CHSH ---------------------------------------------------------------


def binnings(n_patterns: int) -> list[tuple[int, ...]]:
    """All maps from ``n_patterns`` outcomes to bits with both bits used."""
    out = []
    for bits in itertools.product((0, 1), repeat=n_patterns):
        if 0 < sum(bits) < n_patterns:
            out.append(bits)
    return out


STANDARD_BINNINGS = binnings(4)
POSTSELECTED_BINNINGS = binnings(3)


def postselect_tables(tables: np.ndarray) -> np.ndarray:
    """Drop the vacuum pattern on both sides and renormalize each setting block."""
    cut = tables[..., 1:, 1:]
    mass = cut.sum(axis=(-1, -2), keepdims=True)
    if np.any(mass <= 0):
        raise ModelError("no conclusive mass to post-select on")
    return cut / mass


def _signs(binning_list: Sequence[Sequence[int]]) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(binning_list, dtype=float)


_CHSH_SIGN = np.array([[1.0, 1.0], [1.0, -1.0]])


def chsh_matrix(tables: np.ndarray, bins_a: Sequence, bins_b: Sequence) -> np.ndarray:
    """CHSH value for every pair of binnings, shape ``(len(bins_a), len(bins_b))``."""
    sa, sb = _signs(bins_a), _signs(bins_b)
    corr = np.einsum("ka,xyab,lb->xykl", sa, tables, sb)
    return np.einsum("xy,xykl->kl", _CHSH_SIGN, corr)


def chsh_score(
    tables: np.ndarray,
    binning: tuple[Sequence[int], Sequence[int]],
    postselected: bool = False,
) -> float:
    """``sum (-1)^(a+b+xy) P(a, b | x, y)`` after binning each party's patterns."""
    t = postselect_tables(tables) if postselected else tables
    return float(chsh_matrix(t, [binning[0]], [binning[1]])[0, 0])


def best_chsh(tables: np.ndarray, postselected: bool = False) -> tuple[float, tuple[tuple[int, ...], tuple[int, ...]]]:
    bins = POSTSELECTED_BINNINGS if postselected else STANDARD_BINNINGS
    t = postselect_tables(tables) if postselected else tables
    mat = chsh_matrix(t, bins, bins)
    k, l = np.unravel_index(int(np.argmax(mat)), mat.shape)
    return float(mat[k, l]), (bins[k], bins[l])


# --- randomness -----------------------------------------------------------------------


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * math.log2(p) - (1 - p) * math.log2(1 - p))


def randomness_rate(s: float) -> float:
    """Entropy bound per round from a CHSH score (collective attacks)."""
    if s <= 2.0:
        return 0.0
    root = math.sqrt(min(1.0, max(0.0, (s / 2.0) ** 2 - 1.0)))
    return 1.0 - binary_entropy((1.0 + root) / 2.0)


def postselected_randomness_rate(s: float, t1: float, t2: float) -> float:
    return randomness_rate(s) * (1.0 - (1.0 - t1**2) * (1.0 - t2**2))


# --- truncated Fock-space oracle ----------------------------------------------------------


def pair_number_tail(t1: float, t2: float, max_pairs: int) -> float:
    """Probability that the source emits more than ``max_pairs`` pairs in total.

    Each polarization mode pair is thermal, ``P(n) = (1 - T^2) T^(2n)``.
    """
    n = np.arange(max_pairs + 1)
    p1 = (1 - t1**2) * t1 ** (2 * n)
    p2 = (1 - t2**2) * t2 ** (2 * n)
    return float(max(0.0, 1.0 - np.convolve(p1, p2)[: max_pairs + 1].sum()))


def pairs_for_tail(t1: float, t2: float, tail: float, limit: int = 400) -> int:
    """Smallest pair cutoff whose neglected probability is at most ``tail``."""
    n = 8
    while pair_number_tail(t1, t2, n) > tail:
        n += 8
        if n > limit:
            raise ModelError(f"pair cutoff above {limit} needed for tail {tail}")
    return n


def fock_click_probabilities(params: SPDCParams, x: int, y: int, max_pairs: int) -> tuple[np.ndarray, float]:
    """Pattern probabilities from an explicit photon-number expansion.

    Amplitudes of ``|n_ah, n_av, n_bh, n_bv>`` are summed directly from the
    series of ``exp(sum_kl M_kl a_k^+ b_l^+)`` over all 2x2 pair-count tables,
    keeping at most ``max_pairs`` pairs. Returns the table and the neglected
    probability, which bounds every entry's truncation error.
    """
    m = mode_matrix(params, x, y).reshape(-1)
    norm = (1.0 - params.t1**2) * (1.0 - params.t2**2)
    lf = np.array([math.lgamma(k + 1) for k in range(max_pairs + 1)])
    out = np.zeros((4, 4))
    for n in range(max_pairs + 1):
        # p = a_h photons, r = b_h photons, k = (a_h, b_h) pairs
        p, r, k = np.meshgrid(np.arange(n + 1), np.arange(n + 1), np.arange(n + 1), indexing="ij")
        c = np.stack([k, p - k, r - k, n - p - r + k])
        ok = (c >= 0).all(axis=0)
        cc = np.where(ok, c, 0)
        logmag = -lf[cc].sum(axis=0)
        term = np.ones(ok.shape, dtype=complex)
        for kl in range(4):
            term = term * np.where(cc[kl] > 0, m[kl] ** cc[kl], 1.0)
        amp = np.where(ok, term * np.exp(logmag), 0.0).sum(axis=2)
        pp, rr = np.arange(n + 1)[:, None], np.arange(n + 1)[None, :]
        amp = amp * np.exp(0.5 * (lf[pp] + lf[n - pp] + lf[rr] + lf[n - rr]))
        prob = norm * np.abs(amp) ** 2
        ia = np.where(pp > 0, 1, 0) + np.where(n - pp > 0, 2, 0)
        ib = np.where(rr > 0, 1, 0) + np.where(n - rr > 0, 2, 0)
        # (h, v) bits -> pattern index: oo=0, xo=1, ox=2, xx=3
        np.add.at(out, (np.broadcast_to(ia, prob.shape), np.broadcast_to(ib, prob.shape)), prob)
    return out, pair_number_tail(params.t1, params.t2, max_pairs)


# --- dressed network view -----------------------------------------------------------------


def dressed_distribution(params: SPDCParams) -> OutcomeDistribution:
    """Joint distribution on the dressed network (Alice, Bob, Alice's RNG, Bob's RNG).

    Settings are uniform; the vacuum pattern is relabelled as the failure outcome.
    """
    tables = click_tables(params)
    probs = 0.25 * np.transpose(tables, (2, 3, 0, 1))
    labels = (FAIL,) + PATTERNS[1:]
    return OutcomeDistribution((labels, labels, (0, 1), (0, 1)), probs, dress_inputs([2, 2]))


# --- optimization -------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizationResult:
    objective: str
    value: float
    params: SPDCParams
    chsh: float
    binning: tuple[tuple[int, ...], tuple[int, ...]]
    success_probability: float
    randomness: float
    seed: int
    restarts: int
    restart_values: tuple[float, ...] = field(repr=False)
    uses_phases: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["restart_values"] = list(self.restart_values)
        return d


@dataclass(frozen=True)
class _Layout:
    """How the flat optimizer vector maps onto ``SPDCParams``."""

    equal_t: bool
    fixed_t: float | None
    gauge_beta0: bool
    phases: bool

    @property
    def size(self) -> int:
        n_t = 0 if self.fixed_t is not None else (1 if self.equal_t else 2)
        return n_t + (3 if self.gauge_beta0 else 4) + (4 if self.phases else 0)

    def unpack(self, v: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        k = 0
        if self.fixed_t is not None:
            t1 = t2 = self.fixed_t
        elif self.equal_t:
            t1 = t2 = v[0]
            k = 1
        else:
            t1, t2 = v[0], v[1]
            k = 2
        alphas = v[k : k + 2]
        k += 2
        if self.gauge_beta0:
            betas = np.array([0.0, v[k]])
            k += 1
        else:
            betas = v[k : k + 2]
            k += 2
        if self.phases:
            pa, pb = v[k : k + 2], v[k + 2 : k + 4]
        else:
            pa = pb = np.zeros(2)
        return float(t1), float(t2), alphas, betas, pa, pb

    def bounds(self) -> list[tuple[float | None, float | None]]:
        n_t = self.size - (3 if self.gauge_beta0 else 4) - (4 if self.phases else 0)
        return [(0.0, T_MAX)] * n_t + [(None, None)] * (self.size - n_t)

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        n_t = self.size - (3 if self.gauge_beta0 else 4) - (4 if self.phases else 0)
        return np.concatenate([rng.uniform(0.2, 0.85, n_t), rng.uniform(0.0, 2 * np.pi, self.size - n_t)])


def _fast_mode_matrices(t1, t2, alphas, betas, pa, pb) -> np.ndarray:
    ca, sa = np.cos(alphas), np.sin(alphas)
    cb, sb = np.cos(betas), np.sin(betas)
    ra = np.empty((2, 2, 2), complex)
    ra[:, 0, 0], ra[:, 0, 1] = ca, sa * np.exp(1j * pa)
    ra[:, 1, 0], ra[:, 1, 1] = -sa * np.exp(-1j * pa), ca
    rb = np.empty((2, 2, 2), complex)
    rb[:, 0, 0], rb[:, 0, 1] = cb, sb * np.exp(1j * pb)
    rb[:, 1, 0], rb[:, 1, 1] = -sb * np.exp(-1j * pb), cb
    tra = np.swapaxes(ra, -1, -2) * np.array([t1, t2])  # R_a^T diag(T)
    return tra[:, None] @ rb[None, :]


def _evaluate(layout: _Layout, v: np.ndarray, postselected: bool) -> tuple[float, float, float]:
    """(best CHSH, success probability, t-product) for a raw vector."""
    t1, t2, al, be, pa, pb = layout.unpack(v)
    if not (0.0 <= t1 <= T_MAX and 0.0 <= t2 <= T_MAX):
        return -np.inf, 0.0, 0.0
    tables = _tables_from_mode_matrices(_fast_mode_matrices(t1, t2, al, be, pa, pb))
    succ = 1.0 - (1.0 - t1**2) * (1.0 - t2**2)
    if postselected:
        if succ <= 1e-15:
            return -np.inf, succ, 0.0
        tables = postselect_tables(tables)
        bins = POSTSELECTED_BINNINGS
    else:
        bins = STANDARD_BINNINGS
    return float(chsh_matrix(tables, bins, bins).max()), succ, 0.0


def _objective(name: str, layout: _Layout) -> Callable[[np.ndarray], float]:
    post = name.startswith("ps_")

    def f(v: np.ndarray) -> float:
        s, succ, _ = _evaluate(layout, v, post)
        if not np.isfinite(s):
            return 1e3
        if name == "ps_randomness":
            if s <= 2.0:
                # flat region of the rate: steer toward a violation
                return -1e-3 * (s - 2.0) * (1 + succ)
            return -randomness_rate(s) * succ
        # the standard rate is monotone in the score, so both maximize CHSH
        return -s

    return f


def _params_from_vector(layout: _Layout, v: np.ndarray) -> SPDCParams:
    t1, t2, al, be, pa, pb = layout.unpack(v)
    wrap = lambda a: float(np.mod(a, 2 * np.pi))
    return SPDCParams.from_angles(
        min(max(t1, 0.0), T_MAX),
        min(max(t2, 0.0), T_MAX),
        [wrap(a) for a in al],
        [wrap(b) for b in be],
        [wrap(p) for p in pa],
        [wrap(p) for p in pb],
    )


def optimize(
    objective: str,
    seed: int = 7,
    restarts: int = 200,
    equal_t: bool = False,
    fixed_t: float | None = None,
    phases: bool = True,
    gauge_beta0: bool | None = None,
    maxfev: int | None = None,
) -> OptimizationResult:
    """Multi-start Nelder-Mead over pump parameters, angles and phases.

    For each evaluation the best pair of binnings is taken, so the discrete
    binning search is folded into the objective. Starts are drawn up front
    from ``seed``; the best restart wins and ties go to the lower index.
    ``gauge_beta0`` (default: on when ``equal_t``) pins Bob's first angle to 0.
    """
    if objective not in OBJECTIVES:
        raise ModelError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")
    if restarts < 1:
        raise ModelError("restarts must be >= 1")
    if fixed_t is not None and not 0.0 <= fixed_t <= T_MAX:
        raise ModelError(f"fixed_t must lie in [0, {T_MAX}]")
    if gauge_beta0 is None:
        gauge_beta0 = equal_t or fixed_t is not None
    layout = _Layout(equal_t or fixed_t is not None, fixed_t, gauge_beta0, phases)
    f = _objective(objective, layout)
    rng = np.random.default_rng(seed)
    starts = [layout.random_start(rng) for _ in range(restarts)]
    maxfev = maxfev or 400 * layout.size
    values = []
    best_v, best_x = np.inf, None
    for x0 in starts:
        res = minimize(
            f,
            x0,
            method="Nelder-Mead",
            bounds=layout.bounds(),
            options={"xatol": 1e-9, "fatol": 1e-13, "maxfev": maxfev, "adaptive": True},
        )
        values.append(float(-res.fun))
        if res.fun < best_v:
            best_v, best_x = float(res.fun), res.x
    if best_x is None or not np.isfinite(best_v):
        raise OptimizationError(f"no restart of {objective} reached a finite objective value")
    params = _params_from_vector(layout, best_x)
    return summarize(objective, params, seed, restarts, tuple(values))


def summarize(
    objective: str,
    params: SPDCParams,
    seed: int = 0,
    restarts: int = 0,
    restart_values: tuple[float, ...] = (),
) -> OptimizationResult:
    """Re-evaluate a parameter point from scratch and fill in every reported figure."""
    post = objective.startswith("ps_")
    tables = click_tables(params)
    s, binning = best_chsh(tables, postselected=post)
    succ = params.success_probability
    if objective == "ps_randomness":
        rate = postselected_randomness_rate(s, params.t1, params.t2)
        value = rate
    elif post:
        rate = postselected_randomness_rate(s, params.t1, params.t2)
        value = s
    else:
        rate = randomness_rate(s)
        value = rate if objective == "standard_randomness" else s
    uses_phases = any(abs(np.sin(p)) > 1e-6 for _, p in params.alice + params.bob)
    return OptimizationResult(
        objective=objective,
        value=float(value),
        params=params,
        chsh=s,
        binning=binning,
        success_probability=succ if post else 1.0,
        randomness=float(rate),
        seed=seed,
        restarts=restarts,
        restart_values=restart_values,
        uses_phases=uses_phases,
    )


@dataclass(frozen=True)
class ScanRow:
    t: float
    standard_chsh: float
    postselected_chsh: float
    standard_randomness: float
    postselected_randomness: float


def scan(
    t_values: Iterable[float],
    seed: int = 7,
    restarts: int = 20,
    phases: bool = False,
) -> list[ScanRow]:
    """Optimal bare and post-selected CHSH / randomness at each fixed ``T = T1 = T2``."""
    rows = []
    for k, t in enumerate(t_values):
        t = float(t)
        if not 0.0 <= t < 1.0:
            raise ModelError(f"T={t} outside [0, 1)")
        if t == 0.0:
            rows.append(ScanRow(0.0, 2.0, 2.0, 0.0, 0.0))
            continue
        std = optimize("standard_chsh", seed + k, restarts, fixed_t=t, phases=phases)
        ps = optimize("ps_chsh", seed + k, restarts, fixed_t=t, phases=phases)
        rows.append(
            ScanRow(
                t,
                std.chsh,
                ps.chsh,
                randomness_rate(std.chsh),
                postselected_randomness_rate(ps.chsh, t, t),
            )
        )
    return rows


def detector_gauge(params: SPDCParams, alice_shift, bob_shift) -> SPDCParams:
    """Move each rotation along its invisible direction ``(twist + d, phi - d)``."""

    def shift(angles, twists, ds):
        return (
            tuple((th, ph - d) for (th, ph), d in zip(angles, ds)),
            tuple(t + d for t, d in zip(twists, ds)),
        )

    alice, alice_twist = shift(params.alice, params.alice_twist, [float(d) for d in alice_shift])
    bob, bob_twist = shift(params.bob, params.bob_twist, [float(d) for d in bob_shift])
    return replace(params, alice=alice, bob=bob, alice_twist=alice_twist, bob_twist=bob_twist)
