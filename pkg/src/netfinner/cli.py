"""Command-line front end: ``netfinner <command> ...``.

Every emitted file starts with a header holding the tool version, the seed
and a hash of the effective configuration, and contains no timestamps, so
identical configurations produce byte-identical output.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import finner as finner_mod
from . import io as nio
from . import rgb4, spdc
from .classical import output_distribution
from .distribution import OutcomeDistribution
from .errors import (
    FormatError,
    ModelError,
    NetfinnerError,
    NotFairSamplingError,
    ValidationFailed,
)
from .failing import FailureProbabilities, flag_qubit_model, overlay_distribution
from .fairsampling import is_fair_sampling, postselect_transform
from .network import validate
from .quantum import joint_distribution

TOL_ENV = "NETFINNER_TOL"

# (label, objective, equal_t, reference objective value, reference CHSH, reference P_succ)
TABLE_ROWS = (
    ("standard_equal_t", "standard_randomness", True, 0.2479, 2.3008, None),
    ("standard_free_t", "standard_randomness", False, 0.2525, 2.3057, None),
    ("postselected_equal_t", "ps_randomness", True, 0.2712, 2.5326, 0.5474),
    ("postselected_free_t", "ps_randomness", False, 0.2749, 2.5013, 0.6004),
)


def default_tol() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return finner_mod.SATURATION_TOL
    try:
        tol = float(raw)
    except ValueError as exc:
        raise FormatError(f"{TOL_ENV}={raw!r} is not a number") from exc
    if not tol > 0:
        raise FormatError(f"{TOL_ENV} must be positive")
    return tol


def _file_digest(path: str | None) -> str | None:
    if path is None:
        return None
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc


def _config(args: argparse.Namespace) -> dict[str, Any]:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "out_dir", "func")}
    if getattr(args, "model", None):
        cfg["model"] = _file_digest(args.model)
    return cfg


def _fail(args: argparse.Namespace, loaded: nio.LoadedModel) -> FailureProbabilities | None:
    if getattr(args, "fail", None):
        return FailureProbabilities.parse(args.fail)
    return loaded.fail


def _ideal_distribution(loaded: nio.LoadedModel) -> OutcomeDistribution:
    if loaded.quantum is not None:
        return joint_distribution(loaded.quantum)
    if loaded.classical is not None:
        return output_distribution(loaded.classical)
    if loaded.distribution is not None:
        return loaded.distribution
    raise FormatError("model file has no states/povms, responses or probabilities")


def _observed(args: argparse.Namespace, loaded: nio.LoadedModel) -> OutcomeDistribution:
    dist = _ideal_distribution(loaded)
    fail = _fail(args, loaded)
    if fail is not None:
        dist = overlay_distribution(dist, loaded.graph, fail)
    return dist


def _emit_json(args, payload: dict, seed: int | None = None) -> None:
    nio.write_text(args.out, nio.render_json(payload, _config(args), seed))


# --- commands -------------------------------------------------------------------------


def cmd_validate(args) -> int:
    loaded = nio.load_model(args.model)
    report = validate(loaded.graph)
    _emit_json(args, {"valid": report.valid, "bipartite_sources": report.bipartite_sources, "violations": list(report.violations)})
    if not report.valid:
        raise ValidationFailed("; ".join(report.violations))
    return 0


def cmd_simulate(args) -> int:
    loaded = nio.load_model(args.model)
    dist = _observed(args, loaded)
    if args.format == "csv":
        cols, rows = nio.distribution_rows(dist)
        nio.write_text(args.out, nio.render_csv(cols, rows, _config(args), None))
    else:
        _emit_json(args, {"distribution": nio.distribution_to_json(dist)})
    return 0


def cmd_finner_check(args) -> int:
    loaded = nio.load_model(args.model)
    dist = _observed(args, loaded)
    report = finner_mod.finner_check(dist, loaded.graph, args.tol)
    _emit_json(args, {"finner": report.to_dict(), "tol": args.tol})
    return 0


def cmd_rigidity(args) -> int:
    loaded = nio.load_model(args.model)
    if loaded.quantum is None:
        raise ModelError("rigidity needs a quantum model (states and povms)")
    model = loaded.quantum
    fail = _fail(args, loaded)
    if fail is not None:
        model = flag_qubit_model(model, fail)
    verdict = finner_mod.rigidity_verify(model, args.tol)
    oracle = finner_mod.g_oracle(model)
    _emit_json(args, {"rigidity": verdict.to_dict(), "g_oracle": oracle.to_dict(), "tol": args.tol})
    return 0


def cmd_postselect(args) -> int:
    loaded = nio.load_model(args.model)
    if loaded.quantum is None:
        raise ModelError("postselect needs a quantum model (states and povms)")
    flags = is_fair_sampling(loaded.quantum)
    payload: dict[str, Any] = {"fair_sampling": flags}
    if not all(flags):
        _emit_json(args, payload)
        bad = [j for j, f in enumerate(flags) if not f]
        raise NotFairSamplingError(f"parties {bad} are not fair-sampling; post-selection is not loophole-free")
    res = postselect_transform(loaded.quantum)
    payload["success_norms"] = list(res.success_norms)
    payload["success_probability"] = float(np.prod(res.success_norms))
    payload["model"] = nio.quantum_model_to_json(res.model)
    _emit_json(args, payload)
    return 0


def _result_payload(res: spdc.OptimizationResult) -> dict:
    d = res.to_dict()
    d["binning"] = [list(b) for b in res.binning]
    return d


def cmd_spdc_optimize(args) -> int:
    res = spdc.optimize(
        args.objective,
        seed=args.seed,
        restarts=args.restarts,
        equal_t=args.equal_t,
        fixed_t=args.fixed_t,
    )
    _emit_json(args, {"result": _result_payload(res)}, args.seed)
    return 0


SCAN_COLUMNS = ("t", "standard_chsh", "postselected_chsh", "standard_randomness", "postselected_randomness")


def _scan_rows(args, t_min, t_max, steps, restarts) -> list[list[float]]:
    grid = np.linspace(t_min, t_max, steps)
    rows = spdc.scan(grid, seed=args.seed, restarts=restarts)
    return [[getattr(r, c) for c in SCAN_COLUMNS] for r in rows]


def cmd_spdc_scan(args) -> int:
    if not 0 <= args.t_min <= args.t_max < 1 or args.steps < 1:
        raise FormatError("need 0 <= t-min <= t-max < 1 and steps >= 1")
    rows = _scan_rows(args, args.t_min, args.t_max, args.steps, args.restarts)
    nio.write_text(args.out, nio.render_csv(SCAN_COLUMNS, rows, _config(args), args.seed))
    return 0


SWEEP_COLUMNS = ("theta", "r_raw", "L", "scaled", "naive_scaled")


def cmd_rgb4_bound(args) -> int:
    if args.sweep:
        thetas = np.linspace(0.0, rgb4.THETA_MAX, args.sweep)
        rows = rgb4.theta_sweep(thetas, args.fail_beta, args.fail_gamma, args.fail_alpha)
        table = [[getattr(r, c) for c in SWEEP_COLUMNS] for r in rows]
        nio.write_text(args.out, nio.render_csv(SWEEP_COLUMNS, table, _config(args), None))
        return 0
    rep = rgb4.scaled_randomness_bound(args.theta, args.fail_beta, args.fail_gamma, args.fail_alpha)
    _emit_json(args, {"bound": rep.to_dict()})
    return 0


TABLE_COLUMNS = (
    "row",
    "objective",
    "equal_t",
    "value",
    "reference_value",
    "chsh",
    "reference_chsh",
    "success_probability",
    "reference_success_probability",
    "t1",
    "t2",
    "alpha0",
    "alpha1",
    "beta0",
    "beta1",
    "phi_a0",
    "phi_a1",
    "phi_b0",
    "phi_b1",
)


def reproduce_table_rows(seed: int, restarts: int) -> list[list[Any]]:
    rows = []
    for label, objective, equal_t, ref_value, ref_chsh, ref_succ in TABLE_ROWS:
        res = spdc.optimize(objective, seed=seed, restarts=restarts, equal_t=equal_t)
        p = res.params
        rows.append(
            [
                label,
                objective,
                int(equal_t),
                res.value,
                ref_value,
                res.chsh,
                ref_chsh,
                res.success_probability,
                "" if ref_succ is None else ref_succ,
                p.t1,
                p.t2,
                p.alice[0][0],
                p.alice[1][0],
                p.bob[0][0],
                p.bob[1][0],
                p.alice[0][1],
                p.alice[1][1],
                p.bob[0][1],
                p.bob[1][1],
            ]
        )
    return rows


def cmd_reproduce_tables(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _config(args)
    rows = reproduce_table_rows(args.seed, args.restarts)
    nio.write_text(out / "tables.csv", nio.render_csv(TABLE_COLUMNS, rows, cfg, args.seed))
    scan = _scan_rows(args, args.scan_t_min, args.scan_t_max, args.scan_steps, args.scan_restarts)
    nio.write_text(out / "scan.csv", nio.render_csv(SCAN_COLUMNS, scan, cfg, args.seed))
    return 0


# --- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    tol = default_tol()
    p = argparse.ArgumentParser(prog="netfinner", description="Bell nonlocality in networks with failing sources.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, model=True, out=True):
        sp = sub.add_parser(name, help=help_text)
        if model:
            sp.add_argument("--model", required=True, help="model JSON file")
        if out:
            sp.add_argument("--out", default=None, help="output file (default: stdout)")
        sp.set_defaults(func=func)
        return sp

    add("validate", cmd_validate, "check a network for empty or redundant sources")

    sp = add("simulate", cmd_simulate, "exact output distribution of a model")
    sp.add_argument("--fail", default=None, help="per-source failure probabilities, e.g. 0.1,0.2,0.3")
    sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = add("finner-check", cmd_finner_check, "compare P[all conclusive] with the Finner bound")
    sp.add_argument("--fail", default=None)
    sp.add_argument("--tol", type=float, default=tol)

    sp = add("rigidity", cmd_rigidity, "verify the failing-source structure of a quantum model")
    sp.add_argument("--fail", default=None, help="wrap the model in flag qubits with these failure rates")
    sp.add_argument("--tol", type=float, default=tol)

    add("postselect", cmd_postselect, "loophole-free post-selection of a fair-sampling model")

    sp = add("spdc-optimize", cmd_spdc_optimize, "optimize the SPDC CHSH test", model=False)
    sp.add_argument("--objective", choices=spdc.OBJECTIVES, default="ps_randomness")
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--restarts", type=int, default=200)
    sp.add_argument("--equal-t", action="store_true", help="constrain T1 = T2")
    sp.add_argument("--fixed-t", type=float, default=None, help="fix T1 = T2 to this value")

    sp = add("spdc-scan", cmd_spdc_scan, "optimal CHSH / randomness versus T = T1 = T2 (CSV)", model=False)
    sp.add_argument("--t-min", type=float, default=0.05)
    sp.add_argument("--t-max", type=float, default=0.95)
    sp.add_argument("--steps", type=int, default=60)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--restarts", type=int, default=10)

    sp = add("rgb4-bound", cmd_rgb4_bound, "failure-scaled randomness bound for RGB4", model=False)
    sp.add_argument("--theta", type=float, default=0.26)
    sp.add_argument("--fail-alpha", type=float, default=0.0, help="failure rate of the source A does not touch")
    sp.add_argument("--fail-beta", type=float, default=0.0)
    sp.add_argument("--fail-gamma", type=float, default=0.0)
    sp.add_argument("--sweep", type=int, default=0, help="emit a CSV over this many theta values in [0, pi/4]")

    sp = add("reproduce-tables", cmd_reproduce_tables, "regenerate the SPDC optimization tables and T scan", model=False, out=False)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--restarts", type=int, default=200)
    sp.add_argument("--out-dir", default="results")
    sp.add_argument("--scan-t-min", type=float, default=0.05)
    sp.add_argument("--scan-t-max", type=float, default=0.75)
    sp.add_argument("--scan-steps", type=int, default=15)
    sp.add_argument("--scan-restarts", type=int, default=8)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return int(args.func(args))
    except NetfinnerError as exc:
        print(f"netfinner: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
