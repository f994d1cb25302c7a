"""Basis maps over input windows, ground-truth fitting, excitation estimates.

Windows are chronological (u_{t-tau}, ..., u_t) and flattened row-major when
dotted against kernel centers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from robust_sysid import backends, streams
from robust_sysid.adversary import InputPolicy
from robust_sysid.backends import pure as _pure
from robust_sysid.dynamics import SystemSpec, beta_bridge, unroll_auxiliary

DEFAULT_REG_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
WINDOW_HALFWIDTH = 15.0  # fit/center distribution is Unif[-15, 15] per window entry


class SingularGramError(RuntimeError):
    pass


class NonExcitedBasisError(RuntimeError):
    pass


@dataclass(frozen=True)
class BasisSet:
    """M basis functions over (tau+1, m) input windows with Phi(0) = 0.

    kinds:
      - "poly_kernel_sections": phi_j(U) = k(U, c_j) - k(0, c_j) for
        polynomial kernels; form "affine" uses k = (1 + <U,c>/s)^d (the
        centering subtracts 1), form "homogeneous" uses k = (<U,c>/s_j)^d_j
        with per-section degree and scale.
      - "lower_bound_pair": the two scalar window maps of the matching
        lower-bound construction (plain chain; chain with the bridge
        nonlinearity at the innermost step).
      - "linear": identity stack of the flattened window.
    """

    kind: str
    tau: int
    input_dim: int
    centers: Optional[np.ndarray] = None   # (M, (tau+1)*m)
    degrees: Optional[np.ndarray] = None   # (M,)
    scales: Optional[np.ndarray] = None    # (M,)
    form: str = "affine"
    rho: float = 0.0
    L: float = 1.0
    L_phi: Optional[float] = None
    lambda_emp: Optional[float] = None

    @property
    def size(self) -> int:
        if self.kind == "poly_kernel_sections":
            return self.centers.shape[0]
        if self.kind == "lower_bound_pair":
            return 2
        return (self.tau + 1) * self.input_dim

    def with_metadata(self, L_phi=None, lambda_emp=None) -> "BasisSet":
        return replace(
            self,
            L_phi=self.L_phi if L_phi is None else L_phi,
            lambda_emp=self.lambda_emp if lambda_emp is None else lambda_emp,
        )

    def to_json_dict(self) -> dict:
        doc = {"kind": self.kind, "tau": self.tau, "input_dim": self.input_dim, "form": self.form,
               "rho": self.rho, "L": self.L, "L_phi": self.L_phi, "lambda_emp": self.lambda_emp}
        doc["centers"] = None if self.centers is None else [[float(v) for v in r] for r in self.centers]
        doc["degrees"] = None if self.degrees is None else [int(v) for v in self.degrees]
        doc["scales"] = None if self.scales is None else [float(v) for v in self.scales]
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "BasisSet":
        return BasisSet(
            kind=doc["kind"], tau=doc["tau"], input_dim=doc["input_dim"], form=doc.get("form", "affine"),
            rho=doc.get("rho", 0.0), L=doc.get("L", 1.0),
            L_phi=doc.get("L_phi"), lambda_emp=doc.get("lambda_emp"),
            centers=None if doc.get("centers") is None else np.array(doc["centers"], dtype=np.float64),
            degrees=None if doc.get("degrees") is None else np.array(doc["degrees"], dtype=np.int64),
            scales=None if doc.get("scales") is None else np.array(doc["scales"], dtype=np.float64),
        )


def linear_basis(tau: int, input_dim: int) -> BasisSet:
    return BasisSet(kind="linear", tau=tau, input_dim=input_dim)


def lower_bound_pair(rho: float, L: float, tau: int) -> BasisSet:
    return BasisSet(kind="lower_bound_pair", tau=tau, input_dim=1, rho=rho, L=L)


def poly_kernel_sections(
    seed: int,
    tau: int,
    input_dim: int,
    M: int = 25,
    degree: int = 3,
    form: str = "affine",
    halfwidth: float = WINDOW_HALFWIDTH,
) -> BasisSet:
    """Kernel-section basis with centers drawn once from the window law.

    form "affine": the inhomogeneous kernel (1 + <U,c>/s)^degree with the
    single scale s = dim * halfwidth^2/3 (keeps values O(1)).
    form "homogeneous": sections of homogeneous kernels with degrees up to
    `degree` (a full linear block first, directions orthonormalized, then
    higher-degree sections) and per-section scale std(<U,c>).
    """
    dim = (tau + 1) * input_dim
    rng = streams.substream(seed, streams.BASIS_CENTERS)
    raw = rng.uniform(-halfwidth, halfwidth, (M, dim))
    ent_var = halfwidth**2 / 3.0
    if form == "affine":
        degrees = np.full(M, degree, dtype=np.int64)
        scales = np.full(M, dim * ent_var)
        centers = raw
    elif form == "homogeneous":
        n_lin = min(dim, max(1, M - 4))
        n_rest = M - n_lin
        n_quad = (n_rest + 1) // 2
        degrees = np.array([1] * n_lin + [2] * n_quad + [3] * (n_rest - n_quad), dtype=np.int64)
        degrees = np.minimum(degrees, degree)
        Q, _ = _pure._house_qr(raw[:n_lin].T.copy())
        centers = np.vstack([Q[:, :n_lin].T * halfwidth, raw[n_lin:]])
        scales = math.sqrt(ent_var) * np.sqrt((centers * centers).sum(axis=1))
    else:
        raise ValueError(f"unknown kernel form {form!r}")
    return BasisSet(
        kind="poly_kernel_sections", tau=tau, input_dim=input_dim,
        centers=centers, degrees=degrees, scales=scales, form=form,
    )


def evaluate(basis: BasisSet, window) -> np.ndarray:
    """Phi(window): single (tau+1, m) window -> (M,), batch (N,..) -> (N, M)."""
    win = np.asarray(window, dtype=np.float64)
    single = win.ndim == 2
    if single:
        win = win[None]
    if win.shape[1] != basis.tau + 1 or win.shape[2] != basis.input_dim:
        raise ValueError(
            f"window shape {win.shape[1:]} incompatible with (tau+1, m)=({basis.tau + 1}, {basis.input_dim})"
        )
    flat = win.reshape(win.shape[0], -1)
    if basis.kind == "linear":
        out = flat
    elif basis.kind == "lower_bound_pair":
        u = win[:, :, 0]
        rho, L = basis.rho, basis.L
        tau = basis.tau
        z_plain = rho * u[:, 0]
        z_beta = beta_bridge(z_plain)
        for j in range(1, tau):
            z_plain = rho * (z_plain + u[:, j])
            z_beta = rho * (z_beta + u[:, j])
        out = np.stack([L * (z_plain + u[:, tau]), L * (z_beta + u[:, tau])], axis=1)
    else:
        Z = flat @ basis.centers.T / basis.scales[None, :]
        if basis.form == "affine":
            out = (1.0 + Z) ** basis.degrees[None, :] - 1.0
        else:
            out = Z ** basis.degrees[None, :]
    return out[0] if single else out


@dataclass(frozen=True)
class GroundTruth:
    """Ridge-fit reference mapping with held-out approximation error."""

    G_star: np.ndarray     # (r, M)
    eps_bar: float         # held-out RMS of ||y - G Phi||
    eps_max: float         # companion sup diagnostic over the test set
    reg_param: float
    train_mse: float
    test_mse: float
    n_samples: int
    split: float
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "G_star": [[float(v) for v in row] for row in self.G_star],
            "eps_bar": self.eps_bar, "eps_max": self.eps_max,
            "reg_param": self.reg_param, "train_mse": self.train_mse, "test_mse": self.test_mse,
            "n_samples": self.n_samples, "split": self.split, "seed": self.seed,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "GroundTruth":
        return GroundTruth(
            G_star=np.array(doc["G_star"], dtype=np.float64),
            eps_bar=doc["eps_bar"], eps_max=doc["eps_max"], reg_param=doc["reg_param"],
            train_mse=doc["train_mse"], test_mse=doc["test_mse"],
            n_samples=doc["n_samples"], split=doc["split"], seed=doc["seed"],
        )


def ridge_fit(F: np.ndarray, Y: np.ndarray, reg: float):
    """Solve min ||F G' - Y||_F^2 + reg ||G'||_F^2 via the augmented QR path."""
    N, M = F.shape
    if reg > 0.0:
        Aug = np.vstack([F, math.sqrt(reg) * np.eye(M)])
        Rhs = np.vstack([Y, np.zeros((M, Y.shape[1]))])
    else:
        Aug, Rhs = F, Y
    Gt, rank = backends.lstsq(Aug, Rhs)
    return Gt.T, rank


def fit_ground_truth(
    spec: SystemSpec,
    basis: BasisSet,
    tau: int,
    n_samples: int,
    split: float = 0.8,
    reg_grid: Sequence[float] = DEFAULT_REG_GRID,
    seed: int = 0,
    halfwidth: float = WINDOW_HALFWIDTH,
) -> GroundTruth:
    """Kernel/linear ridge regression of the clean window map.

    Samples windows with Unif[-halfwidth, halfwidth] entries, targets the
    clean unroll, splits train:test by `split`, and keeps the grid point with
    the smallest test MSE (ties to the smaller reg).
    """
    M = basis.size
    if n_samples < M:
        raise ValueError(f"n_samples={n_samples} < M={M}")
    rng = streams.substream(seed, streams.FIT_WINDOWS)
    W = rng.uniform(-halfwidth, halfwidth, (n_samples, tau + 1, spec.input_dim))
    F = evaluate(basis, W)
    Y = unroll_auxiliary(spec, W)
    n_train = int(round(split * n_samples))
    Ftr, Fte = F[:n_train], F[n_train:]
    Ytr, Yte = Y[:n_train], Y[n_train:]
    best = None
    for reg in reg_grid:
        G, rank = ridge_fit(Ftr, Ytr, reg)
        test_mse = float(np.mean((Yte - Fte @ G.T) ** 2))
        train_mse = float(np.mean((Ytr - Ftr @ G.T) ** 2))
        if best is None or test_mse < best[0]:
            best = (test_mse, reg, G, rank, train_mse)
    test_mse, reg, G, rank, train_mse = best
    if rank < M:
        gram = Ftr.T @ Ftr
        w, _ = backends.eigh(gram + reg * np.eye(M))
        raise SingularGramError(
            f"design rank {rank} < M={M} at reg={reg:g}; gram eig range [{w[0]:.3e}, {w[-1]:.3e}]"
        )
    res = Yte - Fte @ G.T
    norms = np.sqrt((res * res).sum(axis=1))
    return GroundTruth(
        G_star=G, eps_bar=float(np.sqrt(np.mean(norms**2))), eps_max=float(norms.max()),
        reg_param=float(reg), train_mse=train_mse, test_mse=test_mse,
        n_samples=n_samples, split=split, seed=seed,
    )


def window_draws(policy: InputPolicy, rng, n: int, tau: int, m: int) -> np.ndarray:
    """n i.i.d. stationary windows under the input policy."""
    flat = policy.draw(rng, n * (tau + 1), m)
    return flat.reshape(n, tau + 1, m)


def estimate_excitation(basis: BasisSet, input_policy: InputPolicy, tau: int, n_mc: int, seed: int):
    """(lambda_emp, gram): Monte Carlo E[Phi Phi'] and its smallest-eig root."""
    M = basis.size
    if n_mc < 10 * M:
        raise ValueError(f"n_mc={n_mc} < 10*M={10 * M}")
    rng = streams.substream(seed, streams.EXCITATION_MC)
    W = window_draws(input_policy, rng, n_mc, tau, basis.input_dim)
    F = evaluate(basis, W)
    gram = F.T @ F / n_mc
    w, _ = backends.eigh(gram)
    lambda_emp = math.sqrt(max(0.0, float(w[0])))
    return lambda_emp, gram


def min_eig_with_se(basis: BasisSet, input_policy: InputPolicy, tau: int, n_mc: int, seed: int):
    """(lambda2_min, se, gram) for the Monte Carlo Gram.

    SE is the delta-method estimate std((v'Phi)^2)/sqrt(n) along the minimal
    eigenvector v.
    """
    rng = streams.substream(seed, streams.EXCITATION_MC)
    W = window_draws(input_policy, rng, n_mc, tau, basis.input_dim)
    F = evaluate(basis, W)
    gram = F.T @ F / n_mc
    w, V = backends.eigh(gram)
    v = V[:, 0]
    proj2 = (F @ v) ** 2
    se = float(proj2.std(ddof=1) / math.sqrt(n_mc))
    return float(w[0]), se, gram


def estimate_lipschitz(basis: BasisSet, n_pairs: int, seed: int, halfwidth: float = WINDOW_HALFWIDTH) -> float:
    """Empirical lower bound on L_phi: max_i |phi_i(U)-phi_i(U')|/||U-U'||.

    Pairs mix independent window draws, small random perturbations (local
    slopes), and axis-aligned probes U' = U + h e_j; zero-distance pairs are
    skipped.
    """
    rng = streams.substream(seed, streams.LIPSCHITZ_MC)
    tau, m = basis.tau, basis.input_dim
    dim = (tau + 1) * m
    n_axis = min(n_pairs // 4, 8 * dim)
    n_far = (n_pairs - n_axis) // 2
    W1 = rng.uniform(-halfwidth, halfwidth, (n_pairs, tau + 1, m))
    W2 = np.empty_like(W1)
    W2[:n_far] = rng.uniform(-halfwidth, halfwidth, (n_far, tau + 1, m))
    n_near = n_pairs - n_axis - n_far
    delta = rng.standard_normal((n_near, tau + 1, m))
    W2[n_far : n_far + n_near] = W1[n_far : n_far + n_near] + 1e-4 * halfwidth * delta
    axis_flat = W1[n_far + n_near :].reshape(n_axis, dim).copy()
    for i in range(n_axis):
        axis_flat[i, i % dim] += 1e-4 * halfwidth
    W2[n_far + n_near :] = axis_flat.reshape(n_axis, tau + 1, m)
    F1 = evaluate(basis, W1)
    F2 = evaluate(basis, W2)
    dist = np.sqrt(((W1 - W2).reshape(n_pairs, -1) ** 2).sum(axis=1))
    keep = dist > 0
    if not np.any(keep):
        return 0.0
    ratios = np.abs(F1[keep] - F2[keep]).max(axis=1) / dist[keep]
    return float(ratios.max())
