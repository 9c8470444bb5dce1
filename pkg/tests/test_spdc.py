import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netfinner.errors import ModelError, OptimizationError
from netfinner.finner import finner_check
from netfinner.spdc import (
    POSTSELECTED_BINNINGS,
    STANDARD_BINNINGS,
    SPDCParams,
    best_chsh,
    chsh_score,
    click_probabilities,
    click_tables,
    detector_gauge,
    dressed_distribution,
    fock_click_probabilities,
    generating_term,
    mode_matrix,
    optimize,
    pair_number_tail,
    pairs_for_tail,
    postselect_tables,
    postselected_randomness_rate,
    randomness_rate,
    rotation,
    scan,
    summarize,
)

# (objective, params, chsh, rate, success) for the four reference points
REFERENCE = [
    ("standard_chsh", SPDCParams.from_angles(0.6379, 0.6379, [3.4351, 2.8472], [0, 3.7285]), 2.3008, 0.2479, 1.0),
    ("ps_randomness", SPDCParams.from_angles(0.5721, 0.5721, [2.8240, 3.4587], [0, 2.5074]), None, 0.2712, 0.5474),
    ("standard_chsh", SPDCParams.from_angles(0.6098, 0.7148, [1.6684, 4.3063], [4.5638, 1.9214]), 2.3057, 0.2525, 1.0),
    ("ps_randomness", SPDCParams.from_angles(0.6308, 0.5799, [3.2632, 2.6783], [2.9730, 3.5572]), None, 0.2749, 0.6004),
]


def random_params(rng, t_max=0.9):
    t1, t2 = rng.uniform(0, t_max, 2)
    ang = rng.uniform(0, 2 * np.pi, (4, 2))
    return SPDCParams(t1, t2, tuple(map(tuple, ang[:2])), tuple(map(tuple, ang[2:])))


# --- model ---------------------------------------------------------------------------


def test_rotation_is_unitary():
    r = rotation(0.3, 1.1, 0.7)
    assert np.allclose(r.conj().T @ r, np.eye(2), atol=1e-15)
    assert np.linalg.det(r) == pytest.approx(1.0)


def test_zero_angles_give_diagonal_mode_matrix():
    p = SPDCParams.from_angles(0.3, 0.6, [0, 0], [0, 0])
    assert np.allclose(mode_matrix(p, 0, 0), np.diag([0.3, 0.6]))


def test_quarter_turn_swaps_modes():
    p = SPDCParams.from_angles(0.3, 0.6, [math.pi / 2, 0], [0, 0])
    assert np.allclose(np.abs(mode_matrix(p, 0, 0)), [[0, 0.6], [0.3, 0]], atol=1e-15)


@pytest.mark.parametrize("t", [0.1, 0.5, 0.8])
def test_generating_term_examples(t):
    m = np.diag([t, t])
    assert generating_term(m, 1, 1, 1, 1) == pytest.approx(1.0)
    # vacuum probability (1 - T^2)^2
    assert generating_term(m, 0, 0, 0, 0) == pytest.approx((1 - t**2) ** 2)
    # conditioning only on Bob's side being empty is the same event
    assert generating_term(m, 1, 1, 0, 0) == pytest.approx((1 - t**2) ** 2)


def test_generating_term_rejects_unnormalizable():
    with pytest.raises(ModelError):
        generating_term(np.diag([1.0, 0.5]), 0, 0, 0, 0)


def test_out_of_range_t_rejected():
    with pytest.raises(ModelError):
        SPDCParams.from_angles(1.0, 0.5, [0, 0], [0, 0])


@pytest.mark.parametrize("seed", range(5))
def test_tables_normalized_and_nonnegative(seed):
    tables = click_tables(random_params(np.random.default_rng(seed)))
    assert tables.shape == (2, 2, 4, 4)
    assert tables.min() >= -1e-14
    assert np.allclose(tables.sum(axis=(2, 3)), 1.0, atol=1e-12)


def test_vacuum_is_shared(rng):
    p = random_params(rng)
    t = click_probabilities(p, 0, 1)
    # a pair always lands on both sides, so one side empty means both are
    assert np.allclose(t[0, 1:], 0.0, atol=1e-14)
    assert np.allclose(t[1:, 0], 0.0, atol=1e-14)
    assert t[0, 0] == pytest.approx((1 - p.t1**2) * (1 - p.t2**2))


def test_dressed_distribution_saturates(rng):
    p = random_params(rng)
    d = dressed_distribution(p)
    rep = finner_check(d, d.graph)
    assert rep.saturated
    # the emitting source fails with the vacuum probability, the RNG sources never
    assert rep.implied_e[0] == pytest.approx(1 - p.success_probability, abs=1e-10)
    assert rep.implied_e[1:] == pytest.approx((0.0, 0.0), abs=1e-12)


def test_detector_gauge_is_invisible(rng):
    p = random_params(rng)
    q = detector_gauge(p, rng.uniform(0, 6, 2), rng.uniform(0, 6, 2))
    assert np.abs(click_tables(p) - click_tables(q)).max() <= 1e-12


def test_bare_twist_is_visible():
    p = SPDCParams.from_angles(0.4, 0.7, [1.0, 2.0], [0.5, 2.5])
    q = replace(p, alice_twist=(0.8, 0.0))
    assert np.abs(click_tables(p) - click_tables(q)).max() > 1e-3


# --- CHSH and randomness ------------------------------------------------------------------


def test_binning_counts():
    assert len(STANDARD_BINNINGS) == 14
    assert len(POSTSELECTED_BINNINGS) == 6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_chsh_within_tsirelson(seed):
    tables = click_tables(random_params(np.random.default_rng(seed)))
    assert abs(best_chsh(tables)[0]) <= 2 * math.sqrt(2) + 1e-12
    assert abs(best_chsh(tables, postselected=True)[0]) <= 2 * math.sqrt(2) + 1e-12


def test_constant_binning_scores_two(rng):
    tables = click_tables(random_params(rng))
    # a fixed output on both sides gives E = 1 for every setting pair
    assert chsh_score(tables, ((0, 0, 0, 0), (0, 0, 0, 0))) == pytest.approx(2.0)


def test_postselected_tables_renormalized(rng):
    ps = postselect_tables(click_tables(random_params(rng)))
    assert ps.shape == (2, 2, 3, 3)
    assert np.allclose(ps.sum(axis=(2, 3)), 1.0)


@pytest.mark.parametrize(
    "s,rate",
    [(2.0, 0.0), (1.5, 0.0), (2 * math.sqrt(2), 1.0), (2.3008, 0.2479), (2.5, 0.4564)],
)
def test_randomness_rate_examples(s, rate):
    assert randomness_rate(s) == pytest.approx(rate, abs=1e-4)


def test_randomness_rate_monotone():
    s = np.linspace(2, 2 * math.sqrt(2), 50)
    r = [randomness_rate(x) for x in s]
    assert np.all(np.diff(r) >= 0)


def test_postselected_rate_scales_by_success():
    assert postselected_randomness_rate(2.5, 0.5, 0.5) == pytest.approx(randomness_rate(2.5) * (1 - 0.75**2))


@pytest.mark.parametrize("objective,params,chsh,rate,success", REFERENCE)
def test_reference_points(objective, params, chsh, rate, success):
    r = summarize(objective, params)
    if chsh is not None:
        assert r.chsh == pytest.approx(chsh, abs=1e-4)
    assert r.randomness == pytest.approx(rate, abs=1e-4)
    assert r.success_probability == pytest.approx(success, abs=1e-4)


# --- photon-number oracle -----------------------------------------------------------------


def test_pair_number_tail():
    assert pair_number_tail(0.0, 0.0, 0) == 0.0
    # single mode with T2 = 0: geometric tail T^(2(n+1))
    assert pair_number_tail(0.5, 0.0, 3) == pytest.approx(0.25**4)
    assert pairs_for_tail(0.8, 0.8, 1e-12) >= pairs_for_tail(0.5, 0.5, 1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_fock_oracle_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, t_max=0.7)
    n = pairs_for_tail(p.t1, p.t2, 1e-12)
    for x in range(2):
        for y in range(2):
            f, tail = fock_click_probabilities(p, x, y, n)
            assert tail <= 1e-12
            assert np.abs(f - click_probabilities(p, x, y)).max() <= 1e-10


def test_fock_truncation_error_bounded_by_tail(rng):
    p = random_params(rng, t_max=0.8)
    f, tail = fock_click_probabilities(p, 0, 0, 8)
    assert np.abs(f - click_probabilities(p, 0, 0)).max() <= tail + 1e-12


# --- optimizer ----------------------------------------------------------------------------


def test_optimizer_is_deterministic():
    a = optimize("standard_chsh", seed=3, restarts=2, fixed_t=0.6, phases=False)
    b = optimize("standard_chsh", seed=3, restarts=2, fixed_t=0.6, phases=False)
    assert a.value == b.value and a.params == b.params
    assert len(a.restart_values) == 2
    assert a.value == max(a.restart_values)


def test_optimizer_beats_local_bound():
    r = optimize("standard_chsh", seed=1, restarts=3, fixed_t=0.6, phases=False)
    assert r.chsh > 2.25
    assert r.params.t1 == r.params.t2 == 0.6


def test_unknown_objective():
    with pytest.raises(ModelError):
        optimize("nonsense")


def test_scan_rows():
    rows = scan([0.0, 0.3], seed=2, restarts=2)
    assert (rows[0].standard_chsh, rows[0].postselected_chsh) == (2.0, 2.0)
    r = rows[1]
    assert r.postselected_chsh >= r.standard_chsh
    assert r.standard_randomness == pytest.approx(randomness_rate(r.standard_chsh))


def test_optimizer_reports_non_finite_objective(monkeypatch):
    import netfinner.spdc as spdc_mod

    monkeypatch.setattr(spdc_mod, "_objective", lambda name, layout: lambda v: float("nan"))
    with pytest.raises(OptimizationError):
        optimize("standard_chsh", restarts=1, fixed_t=0.5, maxfev=5)
