"""Command line interface.

Subcommands: simulate, fit-gstar, estimate, check, experiment, lowerbound.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from robust_sysid import harness
from robust_sysid.dynamics import SimulationOverflowError, simulate
from robust_sysid.estimators import NumericalError, RegressionProblem, solve
from robust_sysid.features import SingularGramError, evaluate, fit_ground_truth
from robust_sysid.harness import ConfigError, ExperimentConfig


def _load_config(path: str) -> ExperimentConfig:
    if path == "-":
        doc = json.load(sys.stdin)
    else:
        with open(path) as fh:
            doc = json.load(fh)
    return ExperimentConfig.from_dict(doc)


def _apply_overrides(cfg_doc: dict, args) -> dict:
    doc = dict(cfg_doc)
    if getattr(args, "seed", None) is not None:
        doc["seed0"] = args.seed
    if getattr(args, "output_dir", None) is not None:
        doc["output_dir"] = args.output_dir
    if getattr(args, "scale", None) is not None:
        doc["scale"] = args.scale
    return doc


def _config_from_args(args) -> ExperimentConfig:
    cfg = _load_config(args.config)
    return ExperimentConfig.from_dict(_apply_overrides(cfg.raw, args))


def _cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    tau = int(cfg.system.get("tau", [1])[0])
    rho = float(cfg.system.get("rho", [0.5])[0])
    seed = cfg.seed0
    spec = harness.build_system(cfg, seed, tau, rho)
    traj = simulate(
        spec, cfg.input_policy(cfg.inputs[0]), cfg.attack_policy(tau),
        harness.initial_state(cfg, spec), int(cfg.system["T"]), seed,
    )
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out / "trajectory.csv")
    (out / "system.json").write_text(spec.to_json() + "\n")
    harness.write_manifest(out / "manifest.json", cfg, ["trajectory.csv", "system.json"], 0.0, traj.horizon)
    print(f"simulate: T={traj.horizon} attacks={int(traj.attack_flags.sum())} -> {out / 'trajectory.csv'}")
    return 0


def _cmd_fit_gstar(args) -> int:
    cfg = _config_from_args(args)
    tau = int(cfg.system.get("tau", [1])[0])
    rho = float(cfg.system.get("rho", [0.5])[0])
    seed = cfg.seed0
    spec = harness.build_system(cfg, seed, tau, rho)
    basis = harness.build_basis(cfg, seed, tau, spec.input_dim)
    gt = fit_ground_truth(spec, basis, tau, n_samples=int(cfg.basis.get("n_fit_samples", 2000)), seed=seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gstar.json").write_text(json.dumps(gt.to_json_dict(), indent=2) + "\n")
    (out / "basis.json").write_text(json.dumps(basis.to_json_dict(), indent=2) + "\n")
    print(f"fit-gstar: eps_bar={gt.eps_bar:.6g} reg={gt.reg_param:g} -> {out / 'gstar.json'}")
    return 0


def _cmd_estimate(args) -> int:
    cfg = _config_from_args(args)
    tau = int(cfg.system.get("tau", [1])[0])
    rho = float(cfg.system.get("rho", [0.5])[0])
    seed = cfg.seed0
    spec = harness.build_system(cfg, seed, tau, rho)
    basis = harness.build_basis(cfg, seed, tau, spec.input_dim)
    gt = fit_ground_truth(spec, basis, tau, n_samples=int(cfg.basis.get("n_fit_samples", 2000)), seed=seed)
    T = int(cfg.system["T"])
    traj = simulate(
        spec, cfg.input_policy(cfg.inputs[0]), cfg.attack_policy(tau),
        harness.initial_state(cfg, spec), T, seed,
    )
    windows = np.stack([traj.inputs[t - tau : t + 1] for t in range(tau, T)])
    F = evaluate(basis, windows).T
    Y = traj.observations[tau:].T
    estimators = harness.EXPERIMENT_ESTIMATORS.get(cfg.experiment, ("l2",))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for est in estimators:
        rep = solve(RegressionProblem(features=F, targets=Y, norm=est, t0=tau), cfg.solver, G_star=gt.G_star)
        reports[est] = rep.to_json_dict()
        print(f"estimate[{est}]: frob_error={rep.frob_error:.6g} objective={rep.objective:.6g} "
              f"converged={rep.converged}")
    (out / "estimate_report.json").write_text(json.dumps(reports, indent=2) + "\n")
    return 0


def _cmd_check(args) -> int:
    cfg = _config_from_args(args)
    checks = harness.run_checks(cfg, n_directions=args.directions)
    harness.write_checks(cfg.output_dir, checks)
    summ = checks["summary"]
    print(
        f"check: lemma1_pass={summ['lemma1_pass']} "
        f"sufficient_condition_positive={summ['sufficient_condition_positive_fraction']:.2f} "
        f"-> {Path(cfg.output_dir) / 'checks.json'}"
    )
    return 0


def _cmd_experiment(args) -> int:
    cfg = _config_from_args(args)
    info = harness.run_experiment_to_dir(cfg)
    print(f"experiment[{cfg.experiment}]: rows={info['rows']} wall_ms={info['wall_ms']:.0f} -> {info['csv']}")
    return 0


def _cmd_lowerbound(args) -> int:
    report = harness.run_lower_bound(
        rho=args.rho, tau=args.tau, T=args.T, delta=args.delta,
        n_seeds=args.n_seeds, seed0=args.seed or 0,
    )
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "lowerbound.json").write_text(json.dumps(report, indent=2) + "\n")
    ok = (
        report["gap_max_abs_error"] <= 1e-12
        and report["floor_fraction"] >= 1 - args.delta
        and report["disagreements_under_floor"] == 0
        and report["lambda2_pass"]
    )
    print(f"lowerbound: gap L*rho^tau*c = {report['gap']:.9g} (max id error {report['gap_max_abs_error']:.2e})")
    print(
        f"lowerbound: floor_fraction={report['floor_fraction']:.3f} "
        f"indistinguishable_given_floor={report['agree_given_floor']} "
        f"fitted_gap={report['fitted_gap_from_true']:.9g} pass={ok}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robust-sysid", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON config path or '-' for stdin")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output-dir", default=None)
        p.add_argument("--scale", choices=["desk", "paper"], default=None)

    add_common(sub.add_parser("simulate", help="simulate one trajectory"))
    add_common(sub.add_parser("fit-gstar", help="fit the reference mapping"))
    add_common(sub.add_parser("estimate", help="simulate + fit + estimate on the full horizon"))
    p_check = sub.add_parser("check", help="empirical bound/uniqueness checks")
    add_common(p_check)
    p_check.add_argument("--directions", type=int, default=10000)
    add_common(sub.add_parser("experiment", help="run the configured experiment"))
    p_lb = sub.add_parser("lowerbound", help="matching lower-bound construction")
    p_lb.add_argument("--rho", type=float, required=True)
    p_lb.add_argument("--tau", type=int, required=True)
    p_lb.add_argument("--T", type=int, required=True)
    p_lb.add_argument("--delta", type=float, required=True)
    p_lb.add_argument("--n-seeds", type=int, default=200)
    p_lb.add_argument("--seed", type=int, default=None)
    p_lb.add_argument("--output-dir", default=None)
    return ap


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "simulate": _cmd_simulate,
        "fit-gstar": _cmd_fit_gstar,
        "estimate": _cmd_estimate,
        "check": _cmd_check,
        "experiment": _cmd_experiment,
        "lowerbound": _cmd_lowerbound,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, PermissionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SimulationOverflowError, NumericalError, SingularGramError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
