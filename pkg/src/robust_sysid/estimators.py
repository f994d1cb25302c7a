"""Sum-of-norm estimators: argmin_G sum_t ||y_t - G phi_t||_alpha.

alpha in {1, 2, inf} via IRLS / smoothed descent, plus the squared-l2
(least-squares) baseline. Linear algebra is in-house through the backend
kernels (Householder QR, Jacobi eigensolver).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from robust_sysid import backends

NORMS = ("l1", "l2", "linf", "squared_l2")


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegressionProblem:
    """Feature columns phi_t (M x N) against target columns y_t (r x N)."""

    features: np.ndarray
    targets: np.ndarray
    norm: str
    t0: int = 0

    def __post_init__(self):
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        if self.features.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("features and targets must be 2-D")
        if self.features.shape[1] != self.targets.shape[1]:
            raise ValueError("feature/target column counts differ")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise ValueError("non-finite entries in problem data")


@dataclass(frozen=True)
class SolverConfig:
    smoothing_eps: float = 1e-8
    max_iters: int = 10000
    rel_tol: float = 1e-9
    backend: str = "auto"  # auto | irls | subgradient_polyak | normal_equations


@dataclass
class EstimateReport:
    G_hat: np.ndarray
    objective: float
    iters: int
    converged: bool
    norm: str
    frob_error: Optional[float] = None
    rank_deficient: bool = False
    stationarity: Optional[float] = None
    stationarity_scale: Optional[float] = None
    residual_summary: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "G_hat": [[float(v) for v in row] for row in self.G_hat],
            "objective": self.objective, "iters": self.iters, "converged": self.converged,
            "norm": self.norm, "frob_error": self.frob_error, "rank_deficient": self.rank_deficient,
            "stationarity": self.stationarity, "stationarity_scale": self.stationarity_scale,
            "residual_summary": self.residual_summary,
        }


def objective_value(F: np.ndarray, Y: np.ndarray, G: np.ndarray, norm: str) -> float:
    """Exact sum_t ||y_t - G phi_t||_alpha for feature/target columns."""
    R = Y - G @ F
    if norm == "l2":
        return float(np.sqrt((R * R).sum(axis=0)).sum())
    if norm == "l1":
        return float(np.abs(R).sum())
    if norm == "linf":
        return float(np.abs(R).max(axis=0).sum())
    return float((R * R).sum())


def _smoothed_l2_objective(norms: np.ndarray, eps: float) -> float:
    # Huber-type smoothing whose majorize-minimize iteration is IRLS with
    # weights 1/max(||r||, eps); provably non-increasing across iterations.
    small = norms < eps
    return float(np.where(small, norms**2 / (2 * eps) + eps / 2, norms).sum())


def _weighted_ls(F: np.ndarray, w: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """argmin_G sum_t w_t ||y_t - G phi_t||^2 via normal equations.

    F: (M, N) feature columns, Y: (r, N) target columns, w: (N,) positive.
    Falls back to the Householder QR path when the weighted Gram is not
    numerically positive definite.
    """
    Fw = F * w
    A = Fw @ F.T
    B = Fw @ Y.T
    X = backends.cholesky_solve(A, B)
    if X is None:
        sw = np.sqrt(w)
        Gt, _ = backends.lstsq((F * sw).T, (Y * sw).T)
        return Gt.T
    return X.T


def l2_stationarity(F: np.ndarray, Y: np.ndarray, G: np.ndarray, eps: float):
    """(residual, scale): ||sum_t r_t phi_t'/max(||r_t||, eps)||_F vs sum ||phi_t||.

    eps must be the solver's effective smoothing width for this problem
    (config.smoothing_eps times the internal target normalization), so the
    certificate refers to the smoothed objective that was actually minimized.
    """
    R = Y - G @ F
    nr = np.maximum(np.sqrt((R * R).sum(axis=0)), eps)
    grad = (R / nr) @ F.T
    scale = float(np.sqrt((F * F).sum(axis=0)).sum())
    return float(np.sqrt((grad * grad).sum())), scale


def qr_least_squares(Amat, Bmat):
    """Frobenius-minimal solve of A X = B; minimum-norm on rank deficiency."""
    A = np.asarray(Amat, dtype=np.float64)
    B = np.asarray(Bmat, dtype=np.float64)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise NumericalError("non-finite input to qr_least_squares")
    return backends.lstsq(A, B)


def symmetric_eig(S, tol: float = 1e-10):
    """Jacobi eigendecomposition of a symmetric matrix (ascending)."""
    S = np.asarray(S, dtype=np.float64)
    scale = max(1.0, float(np.abs(S).max()))
    if np.abs(S - S.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric to tolerance")
    w, V = backends.eigh(S)
    ortho = np.abs(V.T @ V - np.eye(S.shape[0])).max()
    if ortho > 1e-10:
        raise NumericalError(f"eigenvector orthonormality defect {ortho:.2e}")
    return w, V


def _solve_squared_l2(F, Y):
    Gt, rank = backends.lstsq(F.T, Y.T)
    G = Gt.T
    return G, rank < F.shape[0]


def _solve_l2_irls(F, Y, cfg):
    eps = cfg.smoothing_eps
    Gt, _ = backends.lstsq(F.T, Y.T)
    G = Gt.T
    R = Y - G @ F
    norms = np.sqrt((R * R).sum(axis=0))
    prev = _smoothed_l2_objective(norms, eps)
    obj0 = max(prev, 1.0)
    floor = eps * F.shape[1]  # smoothing floor: all residuals interpolated
    phi_scale = float(np.sqrt((F * F).sum(axis=0)).sum())
    cert_target = 0.5e-5 * phi_scale  # first-order certificate budget
    converged = prev <= floor
    it = 0
    G_prev = G
    if not converged:
        for it in range(1, cfg.max_iters + 1):
            w = 1.0 / np.maximum(norms, eps)
            G_new = _weighted_ls(F, w, Y)
            # safeguarded extrapolation: keep the accelerated iterate only if
            # it strictly improves the smoothed objective (monotone by build)
            G_acc = G_new + ((it - 1.0) / (it + 2.0)) * (G_new - G_prev)
            R_acc = Y - G_acc @ F
            n_acc = np.sqrt((R_acc * R_acc).sum(axis=0))
            o_acc = _smoothed_l2_objective(n_acc, eps)
            R_new = Y - G_new @ F
            n_new = np.sqrt((R_new * R_new).sum(axis=0))
            o_new = _smoothed_l2_objective(n_new, eps)
            if o_acc < o_new:
                G_prev, G, R, norms, cur = G_new, G_acc, R_acc, n_acc, o_acc
            else:
                G_prev, G, R, norms, cur = G, G_new, R_new, n_new, o_new
            if cur > prev * (1 + 1e-12) + 1e-14 * obj0:
                raise NumericalError(f"IRLS objective increased at iter {it}: {prev:.17g} -> {cur:.17g}")
            if cur <= floor:
                converged = True
                break
            if abs(prev - cur) <= cfg.rel_tol * max(1.0, abs(prev)):
                grad = (R / np.maximum(norms, eps)) @ F.T
                if float(np.sqrt((grad * grad).sum())) <= cert_target:
                    converged = True
                    prev = cur
                    break
            prev = cur
    return G, it, converged


def _solve_l1_irls(F, Y, cfg):
    # row-separable: one scalar IRLS per observation coordinate
    eps = cfg.smoothing_eps
    Gt0, _ = backends.lstsq(F.T, Y.T)
    G = Gt0.T.copy()
    floor = eps * F.shape[1]
    total_iters = 0
    converged = True
    for i in range(Y.shape[0]):
        g = G[i]
        yi = Y[i : i + 1]
        res = np.abs(yi[0] - g @ F)
        prev = _smoothed_l2_objective(res, eps)
        obj0 = max(prev, 1.0)
        row_conv = prev <= floor
        it = 0
        g_prev = g
        if not row_conv:
            for it in range(1, cfg.max_iters + 1):
                w = 1.0 / np.maximum(res, eps)
                g_new = _weighted_ls(F, w, yi)[0]
                g_acc = g_new + ((it - 1.0) / (it + 2.0)) * (g_new - g_prev)
                r_acc = np.abs(yi[0] - g_acc @ F)
                o_acc = _smoothed_l2_objective(r_acc, eps)
                r_new = np.abs(yi[0] - g_new @ F)
                o_new = _smoothed_l2_objective(r_new, eps)
                if o_acc < o_new:
                    g_prev, g, res, cur = g_new, g_acc, r_acc, o_acc
                else:
                    g_prev, g, res, cur = g, g_new, r_new, o_new
                if cur > prev * (1 + 1e-12) + 1e-14 * obj0:
                    raise NumericalError(f"IRLS objective increased on row {i} at iter {it}")
                if cur <= floor or abs(prev - cur) <= cfg.rel_tol * max(1.0, abs(prev)):
                    row_conv = True
                    prev = cur
                    break
                prev = cur
        total_iters += it
        converged = converged and row_conv
        G[i] = g
    return G, total_iters, converged


def _linf_smoothed_value_grad(F, Y, G, theta):
    R = (Y - G @ F) / theta
    mx = np.abs(R).max(axis=0, keepdims=True)
    wp = np.exp(R - mx)
    wn = np.exp(-R - mx)
    denom = (wp + wn).sum(axis=0, keepdims=True)
    val = float((theta * (np.log(denom) + mx)).sum())
    S = (wp - wn) / denom
    grad = -S @ F.T
    return val, grad


def _solve_linf(F, Y, cfg):
    """Log-sum-exp smoothing with halving temperatures.

    theta runs from 0.1*max|r0| down to 1e-5 of that start (scale-free);
    each stage is gradient descent with backtracking. A Polyak subgradient
    polish runs afterwards if the smoothed path stalls.
    """
    Gt, _ = backends.lstsq(F.T, Y.T)
    G = Gt.T
    r0 = float(np.abs(Y - G @ F).max())
    it_total = 0
    if r0 <= 0.0:
        return G, 0, True
    theta = 0.1 * r0
    theta_min = 1e-5 * theta
    best_obj = objective_value(F, Y, G, "linf")
    best_G = G.copy()
    fnorm2 = float((F * F).sum())
    while theta >= theta_min and it_total < cfg.max_iters:
        step = theta / max(fnorm2, 1e-300)
        val, grad = _linf_smoothed_value_grad(F, Y, G, theta)
        for _ in range(200):
            it_total += 1
            gn2 = float((grad * grad).sum())
            if gn2 <= (1e-10 * max(1.0, val)) ** 2:
                break
            # backtracking on the smoothed objective
            trial_step = step * 4.0
            for _ in range(30):
                G_try = G - trial_step * grad
                val_try, grad_try = _linf_smoothed_value_grad(F, Y, G_try, theta)
                if val_try <= val - 0.25 * trial_step * gn2:
                    break
                trial_step *= 0.5
            if val_try > val - 1e-14 * max(1.0, abs(val)):
                break
            step = trial_step
            G, val, grad = G_try, val_try, grad_try
            if it_total >= cfg.max_iters:
                break
        obj = objective_value(F, Y, G, "linf")
        if obj < best_obj:
            best_obj, best_G = obj, G.copy()
        theta *= 0.5
    # Polyak subgradient polish toward the best level seen
    G = best_G.copy()
    obj = best_obj
    for _ in range(200):
        it_total += 1
        R = Y - G @ F
        idx = np.abs(R).argmax(axis=0)
        sgn = np.sign(R[idx, np.arange(R.shape[1])])
        sub = np.zeros_like(R)
        sub[idx, np.arange(R.shape[1])] = sgn
        grad = -sub @ F.T
        gn2 = float((grad * grad).sum())
        if gn2 <= 0.0:
            break
        gap = obj - best_obj * (1 - 1e-6)
        G_try = G - (gap / gn2) * grad
        obj_try = objective_value(F, Y, G_try, "linf")
        if obj_try >= obj - 1e-14 * max(1.0, obj):
            break
        G, obj = G_try, obj_try
        if obj < best_obj:
            best_obj, best_G = obj, G.copy()
    return best_G, it_total, True


def solve(problem: RegressionProblem, config: SolverConfig = SolverConfig(), G_star=None) -> EstimateReport:
    """Minimize the configured sum-of-norms objective; honest convergence flags."""
    F, Y = problem.features, problem.targets
    rank_deficient = False
    y_scale = 1.0
    if problem.norm == "squared_l2" or config.backend == "normal_equations":
        G, rank_deficient = _solve_squared_l2(F, Y)
        iters, converged = 1, True
    else:
        # normalize targets so the iteration path (and the effective
        # smoothing eps) is exactly scale-equivariant
        y_scale = float(np.abs(Y).max())
        if y_scale == 0.0:
            y_scale = 1.0
        Yn = Y / y_scale
        if problem.norm == "l2":
            G, iters, converged = _solve_l2_irls(F, Yn, config)
        elif problem.norm == "l1":
            G, iters, converged = _solve_l1_irls(F, Yn, config)
        else:
            G, iters, converged = _solve_linf(F, Yn, config)
        G = G * y_scale
    obj = objective_value(F, Y, G, problem.norm)
    R = Y - G @ F
    norms = np.sqrt((R * R).sum(axis=0))
    report = EstimateReport(
        G_hat=G, objective=obj, iters=iters, converged=converged, norm=problem.norm,
        rank_deficient=rank_deficient,
        residual_summary={
            "min": float(norms.min()) if norms.size else 0.0,
            "median": float(np.median(norms)) if norms.size else 0.0,
            "mean": float(norms.mean()) if norms.size else 0.0,
            "max": float(norms.max()) if norms.size else 0.0,
        },
    )
    if problem.norm == "l2":
        st, scale = l2_stationarity(F, Y, G, config.smoothing_eps * y_scale)
        report.stationarity = st
        report.stationarity_scale = scale
    if G_star is not None:
        report.frob_error = float(np.sqrt(((G - G_star) ** 2).sum()))
    return report


def brute_force_scan_1d(F, Y, norm: str, lo: float, hi: float, step: float = 1e-4) -> float:
    """Grid-scan minimizer of the exact 1-D objective (M = r = 1 problems)."""
    f = np.asarray(F, dtype=np.float64).ravel()
    y = np.asarray(Y, dtype=np.float64).ravel()
    grid = np.arange(lo, hi + step, step)
    R = y[None, :] - grid[:, None] * f[None, :]
    if norm == "squared_l2":
        vals = (R * R).sum(axis=1)
    elif norm == "linf":
        vals = np.abs(R).sum(axis=1)  # r = 1: linf == l1 == l2 per column
    else:
        vals = np.abs(R).sum(axis=1)
    return float(grid[int(np.argmin(vals))])
