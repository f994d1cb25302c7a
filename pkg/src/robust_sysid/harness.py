"""Experiment orchestration: config ingestion, the three benchmark studies,
theory-check reports, and result persistence (results.csv + manifest.json)."""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

import robust_sysid
from robust_sysid import backends, streams
from robust_sysid.adversary import AttackPolicy, InputPolicy, check_attack_probability, max_attack_free_run
from robust_sysid.dynamics import (
    SystemSpec,
    lemma1_decompose,
    random_activated_linear,
    scalar_contract,
    simulate,
    unroll_auxiliary,
)
from robust_sysid.estimators import EstimateReport, RegressionProblem, SolverConfig, solve
from robust_sysid.features import (
    BasisSet,
    evaluate,
    fit_ground_truth,
    estimate_excitation,
    estimate_lipschitz,
    linear_basis,
    poly_kernel_sections,
)
from robust_sysid.theory_checks import (
    build_lower_bound_instance,
    check_sufficient_condition,
    clean_window_flags,
    compute_nu,
    lower_bound_report,
)

SCHEMA_VERSION = 1
CSV_COLUMNS = [
    "experiment", "seed", "input_family", "estimator", "tau", "rho", "t",
    "frob_error", "eps_bar", "lambda_emp", "nu", "converged",
]
EXPERIMENT_ESTIMATORS = {
    "compare_ls_l2": ("squared_l2", "l2"),
    "compare_norms": ("l1", "l2", "linf"),
    "sweep_tau_rho": ("l2",),
}
DESK_CAPS = {"n": 20, "T": 2000, "n_seeds": 20}


class ConfigError(ValueError):
    pass


def thread_count() -> int:
    """Worker count for the experiment pool (ROBUST_SYSID_THREADS override).

    Defaults to 1: cells are CPU-bound through GIL-holding kernels, so
    parallelism uses a process pool and is strictly opt-in.
    """
    env = os.environ.get("ROBUST_SYSID_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"bad ROBUST_SYSID_THREADS={env!r}") from exc
    return 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; `raw` is the canonical JSON dict."""

    experiment: str
    scale: str
    system: dict
    inputs: tuple
    attack: dict
    basis: dict
    solver: SolverConfig
    n_seeds: int
    seed0: int
    eval_points: int
    excitation_mc: int
    output_dir: str
    raw: dict = field(repr=False)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        try:
            experiment = doc["experiment"]
            if experiment not in (*EXPERIMENT_ESTIMATORS, "lower_bound", "custom"):
                raise ConfigError(f"unknown experiment {experiment!r}")
            scale = doc.get("scale", "desk")
            if scale not in ("desk", "paper"):
                raise ConfigError(f"unknown scale {scale!r}")
            system = dict(doc["system"])
            inputs = tuple(dict(b) for b in doc.get("inputs", []))
            if not inputs:
                raise ConfigError("at least one input family is required")
            attack = dict(doc.get("attack", {"p": 0.0, "kind": "none", "params": []}))
            basis = dict(doc.get("basis", {}))
            solver_doc = dict(doc.get("solver", {}))
            solver = SolverConfig(
                smoothing_eps=solver_doc.get("smoothing_eps", 1e-8),
                max_iters=int(solver_doc.get("max_iters", 10000)),
                rel_tol=solver_doc.get("rel_tol", 1e-9),
            )
            n_seeds = int(doc.get("n_seeds", 10))
            cfg = ExperimentConfig(
                experiment=experiment,
                scale=scale,
                system=system,
                inputs=inputs,
                attack=attack,
                basis=basis,
                solver=solver,
                n_seeds=n_seeds,
                seed0=int(doc.get("seed0", 0)),
                eval_points=int(doc.get("eval_points", 50)),
                excitation_mc=int(doc.get("excitation_mc", 2000)),
                output_dir=doc.get("output_dir", "out"),
                raw=doc,
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        T = int(self.system.get("T", 0))
        if T < 2:
            raise ConfigError("system.T must be >= 2")
        if self.scale == "desk":
            n = int(self.system.get("n", 1))
            if n > DESK_CAPS["n"] or T > DESK_CAPS["T"] or self.n_seeds > DESK_CAPS["n_seeds"]:
                raise ConfigError(
                    f"desk scale caps: n <= {DESK_CAPS['n']}, T <= {DESK_CAPS['T']}, "
                    f"n_seeds <= {DESK_CAPS['n_seeds']}"
                )
        for grid_key in ("rho", "tau"):
            if grid_key in self.system and not isinstance(self.system[grid_key], list):
                raise ConfigError(f"system.{grid_key} must be a list (grid)")

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def attack_policy(self, tau: int) -> AttackPolicy:
        doc = dict(self.attack)
        p = doc.get("p")
        if p is None:
            p = 1.0 / (2 * tau + 1)
        params = doc.get("params", [])
        kind = doc.get("kind", "none")
        if kind == "signed_mean_gaussian":
            pol = AttackPolicy(p=p, kind=kind, mean_pos=params[0], mean_neg=params[1], variance=params[2])
        elif kind == "constant_sigma":
            pol = AttackPolicy(p=p, kind=kind, value=params[0])
        else:
            pol = AttackPolicy(p=p, kind="none")
        if pol.p > 0:
            check_attack_probability(pol.p, tau, enforce=False)
        return pol

    def input_policy(self, block: dict) -> InputPolicy:
        doc = {k: v for k, v in block.items() if k != "name"}
        return InputPolicy.from_json_dict(doc)


def build_system(cfg: ExperimentConfig, seed: int, tau: int, rho: float) -> SystemSpec:
    kind = cfg.system.get("kind", "activated_linear")
    if kind == "activated_linear":
        return random_activated_linear(
            seed=seed,
            n=int(cfg.system["n"]), m=int(cfg.system["m"]), r=int(cfg.system["r"]),
            rho=rho,
            activation=cfg.system.get("activation", "tanh"),
            input_gain=float(cfg.system.get("input_gain", 1.0)),
        )
    if kind == "scalar_contract":
        return scalar_contract(rho, float(cfg.system.get("L", 1.0)))
    raise ConfigError(f"unknown system kind {kind!r}")


def build_basis(cfg: ExperimentConfig, seed: int, tau: int, m: int) -> BasisSet:
    kind = cfg.basis.get("kind", "poly_kernel_sections")
    if kind == "linear":
        return linear_basis(tau, m)
    return poly_kernel_sections(
        seed=seed,
        tau=tau,
        input_dim=m,
        M=int(cfg.basis.get("M", 25)),
        degree=int(cfg.basis.get("degree", 3)),
        form=cfg.basis.get("form", "homogeneous"),
        halfwidth=float(cfg.basis.get("halfwidth", 15.0)),
    )


def initial_state(cfg: ExperimentConfig, spec: SystemSpec) -> np.ndarray:
    x0 = float(cfg.system.get("x0", 0.0))
    return np.full(spec.state_dim, x0)


def eval_grid(tau: int, T: int, points: int) -> list[int]:
    """Prefix horizons {tau + k*stride} up to T, T always included."""
    stride = max(1, T // points)
    ts = list(range(tau + stride, T, stride))
    if not ts or ts[-1] != T:
        ts.append(T)
    return ts


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    input_family: str
    estimator: str
    tau: int
    rho: float
    t: int
    frob_error: float
    eps_bar: float
    lambda_emp: float
    nu: float
    converged: bool

    def csv_values(self) -> list[str]:
        return [
            self.experiment, str(self.seed), self.input_family, self.estimator,
            str(self.tau), f"{self.rho:.12g}", str(self.t),
            f"{self.frob_error:.12g}", f"{self.eps_bar:.12g}", f"{self.lambda_emp:.12g}",
            f"{self.nu:.12g}", str(int(self.converged)),
        ]


def _run_cell(cfg: ExperimentConfig, family_block: dict, seed: int, tau: int, rho: float,
              estimators: tuple) -> list[ResultRow]:
    """One (seed, input-family, tau, rho) cell: simulate, fit, estimate curves."""
    spec = build_system(cfg, seed, tau, rho)
    basis = build_basis(cfg, seed, tau, spec.input_dim)
    gt = fit_ground_truth(
        spec, basis, tau,
        n_samples=int(cfg.basis.get("n_fit_samples", 2000)),
        seed=seed,
        halfwidth=float(cfg.basis.get("halfwidth", 15.0)),
    )
    policy = cfg.input_policy(family_block)
    attack = cfg.attack_policy(tau)
    n_mc = max(cfg.excitation_mc, 10 * basis.size)
    lam, _gram = estimate_excitation(basis, policy, tau, n_mc, seed)
    l_phi = estimate_lipschitz(basis, 2000, seed)
    basis_meta = basis.with_metadata(L_phi=l_phi, lambda_emp=lam)
    if lam > 0:
        nu = compute_nu(basis_meta, policy, tau).nu
    else:
        nu = float("nan")
    T = int(cfg.system["T"])
    traj = simulate(spec, policy, attack, initial_state(cfg, spec), T, seed)
    windows = np.stack([traj.inputs[t - tau : t + 1] for t in range(tau, T)])
    F_all = evaluate(basis, windows).T          # (M, T - tau)
    Y_all = traj.observations[tau:].T           # (r, T - tau)
    family = family_block.get("name", family_block.get("kind", "input"))
    rows = []
    for t_end in eval_grid(tau, T, cfg.eval_points):
        n_cols = t_end - tau
        F = F_all[:, :n_cols]
        Y = Y_all[:, :n_cols]
        for est in estimators:
            problem = RegressionProblem(features=F, targets=Y, norm=est, t0=tau)
            report = solve(problem, cfg.solver, G_star=gt.G_star)
            rows.append(ResultRow(
                experiment=cfg.experiment, seed=seed, input_family=family, estimator=est,
                tau=tau, rho=rho, t=t_end, frob_error=report.frob_error,
                eps_bar=gt.eps_bar, lambda_emp=lam, nu=nu, converged=report.converged,
            ))
    return rows


def _run_grid(cfg: ExperimentConfig, estimators: tuple) -> list[ResultRow]:
    taus = [int(v) for v in cfg.system.get("tau", [1])]
    rhos = [float(v) for v in cfg.system.get("rho", [0.5])]
    cells = [
        (family, seed, tau, rho)
        for tau in taus
        for rho in rhos
        for family in cfg.inputs
        for seed in range(cfg.seed0, cfg.seed0 + cfg.n_seeds)
    ]
    rows: list[ResultRow] = []
    workers = thread_count()
    if workers == 1:
        for family, seed, tau, rho in cells:
            rows.extend(_run_cell(cfg, family, seed, tau, rho, estimators))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, cfg, family, seed, tau, rho, estimators)
                       for family, seed, tau, rho in cells]
            for fut in futures:
                rows.extend(fut.result())
    rows.sort(key=lambda r: (r.experiment, r.seed, r.estimator, r.t, r.tau, r.rho, r.input_family))
    return rows


def run_experiment_1(cfg: ExperimentConfig) -> list[ResultRow]:
    if cfg.experiment != "compare_ls_l2":
        raise ConfigError("config.experiment must be compare_ls_l2")
    return _run_grid(cfg, EXPERIMENT_ESTIMATORS["compare_ls_l2"])


def run_experiment_2(cfg: ExperimentConfig) -> list[ResultRow]:
    if cfg.experiment != "compare_norms":
        raise ConfigError("config.experiment must be compare_norms")
    return _run_grid(cfg, EXPERIMENT_ESTIMATORS["compare_norms"])


def run_experiment_3(cfg: ExperimentConfig) -> list[ResultRow]:
    if cfg.experiment != "sweep_tau_rho":
        raise ConfigError("config.experiment must be sweep_tau_rho")
    return _run_grid(cfg, EXPERIMENT_ESTIMATORS["sweep_tau_rho"])


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    runner = {
        "compare_ls_l2": run_experiment_1,
        "compare_norms": run_experiment_2,
        "sweep_tau_rho": run_experiment_3,
    }.get(cfg.experiment)
    if runner is None:
        raise ConfigError(f"experiment {cfg.experiment!r} has no runner")
    return runner(cfg)


def write_results_csv(path, rows: list[ResultRow]) -> None:
    with open(path, "w") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row.csv_values()) + "\n")


def write_manifest(path, cfg: ExperimentConfig, artifacts: list[str], wall_ms: float, n_rows: int) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg.config_hash,
        "config": cfg.raw,
        "artifacts": artifacts,
        "wall_ms": round(wall_ms, 3),
        "n_rows": n_rows,
        "package_version": robust_sysid.__version__,
        "backend": backends.BACKEND_NAME,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def run_experiment_to_dir(cfg: ExperimentConfig, output_dir: Optional[str] = None) -> dict:
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = run_experiment(cfg)
    wall_ms = (time.perf_counter() - t0) * 1e3
    csv_path = out / "results.csv"
    write_results_csv(csv_path, rows)
    write_manifest(out / "manifest.json", cfg, ["results.csv"], wall_ms, len(rows))
    return {"rows": len(rows), "csv": str(csv_path), "wall_ms": wall_ms}


# ---------------------------------------------------------------------------
# theory-check report (the `check` subcommand and acceptance support)

def run_checks(cfg: ExperimentConfig, n_directions: int = 10000) -> dict:
    """Per-seed empirical checks: separation bound, uniqueness condition,
    excitation, attack-free run statistics."""
    tau = int(cfg.system.get("tau", [1])[0])
    rho = float(cfg.system.get("rho", [0.5])[0])
    family = cfg.inputs[0]
    policy = cfg.input_policy(family)
    attack = cfg.attack_policy(tau)
    T = int(cfg.system["T"])
    results = []
    for seed in range(cfg.seed0, cfg.seed0 + cfg.n_seeds):
        spec = build_system(cfg, seed, tau, rho)
        basis = build_basis(cfg, seed, tau, spec.input_dim)
        traj = simulate(spec, policy, attack, initial_state(cfg, spec), T, seed)
        worst = 0.0
        for t in range(tau, T):
            _, residual, w_bound, x_bound = lemma1_decompose(spec, traj, t, tau)
            bound = w_bound + x_bound
            r = float(np.linalg.norm(residual))
            ratio = r / bound if bound > 0 else (0.0 if r <= 1e-12 else math.inf)
            worst = max(worst, ratio)
        windows = np.stack([traj.inputs[t - tau : t + 1] for t in range(tau, T)])
        F = evaluate(basis, windows).T
        flags = clean_window_flags(traj.attack_flags, tau)
        min_val, _ = check_sufficient_condition(F, flags, n_directions, seed, spec.obs_dim)
        lam, _ = estimate_excitation(basis, policy, tau, max(cfg.excitation_mc, 10 * basis.size), seed)
        results.append({
            "seed": seed,
            "lemma1_worst_ratio": worst,
            "sufficient_condition_min": min_val,
            "lambda_emp": lam,
            "max_attack_free_run": int(max_attack_free_run(traj.attack_flags)),
            "attack_frequency": float(traj.attack_flags.mean()),
        })
    checks = {
        "config_hash": cfg.config_hash,
        "tau": tau, "rho": rho, "p": attack.p, "T": T,
        "seeds": list(range(cfg.seed0, cfg.seed0 + cfg.n_seeds)),
        "per_seed": results,
        "summary": {
            "lemma1_pass": all(r["lemma1_worst_ratio"] <= 1.0 + 1e-6 for r in results),
            "sufficient_condition_positive_fraction":
                sum(r["sufficient_condition_min"] > 0 for r in results) / len(results),
        },
    }
    return checks


def write_checks(out_dir, checks: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "checks.json", "w") as fh:
        json.dump(checks, fh, indent=2)
        fh.write("\n")
    with open(out / "checks.csv", "w") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        fh.write("check_name,seed,value,threshold,pass\n")
        for r in checks["per_seed"]:
            fh.write(f"lemma1_worst_ratio,{r['seed']},{r['lemma1_worst_ratio']:.12g},1,{int(r['lemma1_worst_ratio'] <= 1 + 1e-6)}\n")
            fh.write(f"sufficient_condition_min,{r['seed']},{r['sufficient_condition_min']:.12g},0,{int(r['sufficient_condition_min'] > 0)}\n")
            fh.write(f"lambda_emp,{r['seed']},{r['lambda_emp']:.12g},0,{int(r['lambda_emp'] > 0)}\n")


def run_lower_bound(rho: float, tau: int, T: int, delta: float, n_seeds: int = 100,
                    seed0: int = 0, L: float = 1.0) -> dict:
    inst = build_lower_bound_instance(rho, L, tau, T, delta)
    return lower_bound_report(inst, n_seeds=n_seeds, seed0=seed0)
