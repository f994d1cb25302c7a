"""Empirical verification devices: the sampled-direction uniqueness condition,
the matching lower-bound construction, and the nu diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from robust_sysid import backends, streams
from robust_sysid.adversary import AttackPolicy, InputPolicy, max_attack_free_run
from robust_sysid.dynamics import (
    SystemSpec,
    TANH1,
    scalar_contract,
    scalar_contract_beta,
    simulate,
    unroll_auxiliary,
)
from robust_sysid.features import BasisSet, NonExcitedBasisError, evaluate, lower_bound_pair, min_eig_with_se


def clean_window_flags(attack_flags, tau: int) -> np.ndarray:
    """1{w_{t-1} = ... = w_{t-tau} = 0} for t = tau..T-1, from the attack bits."""
    xi = np.asarray(attack_flags).astype(bool)
    T = xi.shape[0]
    out = np.empty(T - tau, dtype=bool)
    for i, t in enumerate(range(tau, T)):
        out[i] = not xi[t - tau : t].any()
    return out


def check_sufficient_condition(features, clean_flags, n_directions: int, seed: int, obs_dim: int):
    """Sampled minimum of sum_t (+-)||Z phi_t|| over unit-Frobenius directions.

    Sign is +1 on steps whose disturbance window is clean, -1 otherwise.
    Directions Z are (obs_dim x M), i.i.d. normal normalized to unit Frobenius
    norm. Returns (min_value, argmin_direction). A positive minimum supports
    the exact-recovery condition; sampling can only falsify or support it.
    """
    if n_directions < 1:
        raise ValueError("n_directions must be >= 1")
    F = np.asarray(features, dtype=np.float64)
    flags = np.asarray(clean_flags, dtype=bool)
    if F.shape[1] != flags.shape[0]:
        raise ValueError("features/flags length mismatch")
    signs = np.where(flags, 1.0, -1.0)
    M = F.shape[0]
    rng = streams.substream(seed, streams.DIRECTIONS)
    best_val = math.inf
    best_Z = None
    chunk = max(1, min(n_directions, int(2e6 // max(1, F.shape[1] * obs_dim))))
    remaining = n_directions
    while remaining > 0:
        b = min(chunk, remaining)
        Z = rng.standard_normal((b, obs_dim, M))
        nrm = np.sqrt((Z * Z).sum(axis=(1, 2), keepdims=True))
        Z /= nrm
        vals = backends.signed_norm_sums(F, signs, Z)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val = float(vals[i])
            best_Z = Z[i].copy()
        remaining -= b
    return best_val, best_Z


@dataclass(frozen=True)
class LowerBoundInstance:
    """The scalar two-mapping construction with bridge nonlinearity."""

    rho: float
    L: float
    tau: int
    T: int
    delta: float
    kappa: float
    c: float
    sigma_w: float
    h1: SystemSpec
    h2: SystemSpec
    basis: BasisSet
    input_policy: InputPolicy
    attack_policy: AttackPolicy

    @property
    def gap(self) -> float:
        """|h1 - h2| clean-mapping gap on sign windows: L * rho^tau * c."""
        return self.L * self.rho**self.tau * self.c


def bridge_constant(rho: float) -> float:
    """c = |1 - tanh(rho)/(rho tanh(1))|, in (0,1) for rho in (0,1)."""
    return abs(1.0 - math.tanh(rho) / (rho * TANH1))


SIGMA_W_CAP = 1e30  # doubles-safe ceiling; see notes on the state floor


def build_lower_bound_instance(
    rho: float, L: float, tau: int, T: int, delta: float, kappa: float = 2.0
) -> LowerBoundInstance:
    """Assemble the full construction: two systems, two-function basis,
    sign inputs, constant-magnitude attacks at p = 1/(2 tau + 1)."""
    c = bridge_constant(rho)
    exponent = math.ceil(kappa * tau * math.log(T / delta))
    sigma_w = min((1.0 / rho) ** exponent, SIGMA_W_CAP)
    return LowerBoundInstance(
        rho=rho, L=L, tau=tau, T=T, delta=delta, kappa=kappa, c=c, sigma_w=sigma_w,
        h1=scalar_contract(rho, L),
        h2=scalar_contract_beta(rho, L),
        basis=lower_bound_pair(rho, L, tau),
        input_policy=InputPolicy(kind="rademacher"),
        attack_policy=AttackPolicy(p=1.0 / (2 * tau + 1), kind="constant_sigma", value=sigma_w),
    )


def lower_bound_report(inst: LowerBoundInstance, n_seeds: int, seed0: int = 0,
                       n_windows: int = 1000, n_mc: int = 100000) -> dict:
    """Run the construction end to end and report every checkable identity.

    Covers: the exact clean-mapping gap on sign windows, per-seed trajectory
    indistinguishability wherever the state floor x_t >= 1 holds, the floor
    frequency, the excitation lower bound for the two-function basis, and the
    fitted-mapping Frobenius gap from the alternative system's clean map.
    """
    rho, L, tau, T = inst.rho, inst.L, inst.tau, inst.T
    guard = max(10.0 * inst.sigma_w, 1e12)

    rng = streams.substream(seed0, streams.DIRECTIONS)
    wins = rng.choice(np.array([-1.0, 1.0]), size=(n_windows, tau + 1, 1))
    F2 = evaluate(inst.basis, wins)
    gaps = np.abs(F2[:, 0] - F2[:, 1])
    gap_err = float(np.abs(gaps - inst.gap).max())

    clean_h1 = unroll_auxiliary(inst.h1, wins)[:, 0]
    clean_h2 = unroll_auxiliary(inst.h2, wins)[:, 0]
    unroll_match_h1 = float(np.abs(clean_h1 - F2[:, 0]).max())
    unroll_match_h2 = float(np.abs(clean_h2 - F2[:, 1]).max())

    floor_ok = 0
    agree_ok = 0
    disagree_when_floor = 0
    m_runs = []
    for i in range(n_seeds):
        seed = seed0 + i
        t1 = simulate(inst.h1, inst.input_policy, inst.attack_policy, [inst.sigma_w], T, seed, state_guard=guard)
        t2 = simulate(inst.h2, inst.input_policy, inst.attack_policy, [inst.sigma_w], T, seed, state_guard=guard)
        m_runs.append(max_attack_free_run(t1.attack_flags))
        floor = bool(t1.states.min() >= 1.0)
        same = bool(np.abs(t1.observations - t2.observations).max() <= 1e-10)
        floor_ok += floor
        if floor:
            agree_ok += same
            disagree_when_floor += not same
    # fit the alternative mapping's clean targets with the pair basis
    targets = clean_h2[:, None]
    Gt, _ = backends.lstsq(F2, targets)
    G_fit = Gt.T  # (1, 2)
    G_true = np.array([[1.0, 0.0]])
    fit_gap = float(np.sqrt(((G_fit - G_true) ** 2).sum()))

    lam2, lam2_se, gram = min_eig_with_se(inst.basis, inst.input_policy, tau, n_mc, seed0)
    lam_bound = (L * rho**tau * inst.c) ** 2 / 3.0

    return {
        "rho": rho, "L": L, "tau": tau, "T": T, "delta": inst.delta, "kappa": inst.kappa,
        "c": inst.c, "sigma_w": inst.sigma_w, "gap": inst.gap,
        "gap_max_abs_error": gap_err,
        "unroll_match_h1": unroll_match_h1, "unroll_match_h2": unroll_match_h2,
        "n_seeds": n_seeds,
        "floor_fraction": floor_ok / n_seeds,
        "agree_given_floor": (agree_ok / floor_ok) if floor_ok else None,
        "disagreements_under_floor": disagree_when_floor,
        "max_attack_free_run_median": float(np.median(m_runs)),
        "fitted_gap_from_true": fit_gap,
        "lambda2_emp": lam2, "lambda2_se": lam2_se, "lambda2_bound": lam_bound,
        "lambda2_pass": bool(lam2 >= lam_bound - 3 * lam2_se),
    }


@dataclass(frozen=True)
class NuDiagnostic:
    """nu = sqrt(M tau) L_phi sigma_u / lambda plus the time-bound surrogate.

    The time bound uses the unstated absolute constant set to 1 and is a
    diagnostic, not a certified quantity.
    """

    nu: float
    time_bound_estimate: Optional[float]
    note: str = "diagnostic, not certified"


def compute_nu(
    basis: BasisSet,
    input_policy: InputPolicy,
    tau: int,
    p: Optional[float] = None,
    r: Optional[int] = None,
    delta: float = 0.1,
) -> NuDiagnostic:
    """nu from the basis' empirical L_phi/lambda metadata and sigma_u."""
    if basis.lambda_emp is None or basis.L_phi is None:
        raise ValueError("basis needs L_phi and lambda_emp metadata (see estimate_* helpers)")
    if basis.lambda_emp <= 0.0:
        raise NonExcitedBasisError("lambda_emp = 0: basis is not excited")
    M = basis.size
    nu = math.sqrt(M * max(tau, 1)) * basis.L_phi * input_policy.sigma_u / basis.lambda_emp
    bound = None
    if p is not None and r is not None:
        margin = 2.0 * (1.0 - p) ** tau - 1.0
        if margin > 0:
            bound = (
                tau * nu**8 / margin**2 * (r * M * math.log(max(tau * nu / margin, math.e)) + math.log(1.0 / delta))
            )
    return NuDiagnostic(nu=nu, time_bound_estimate=bound)
