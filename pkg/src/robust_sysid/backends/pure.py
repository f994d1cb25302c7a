"""Pure-numpy implementations of the numeric kernels.

Twin of the compiled extension `robust_sysid._kernels`; same contracts, used
as the fallback backend. All solvers here are in-house (Householder QR,
Jacobi rotations, power products) — numpy provides array arithmetic only.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"


def _house_vector(x):
    """Householder reflector v (unit) such that (I-2vv')x = (alpha, 0, ...)."""
    normx = np.sqrt(np.dot(x, x))
    if normx == 0.0:
        return None, 0.0
    alpha = -normx if x[0] >= 0 else normx
    v = x.copy()
    v[0] -= alpha
    vnorm = np.sqrt(np.dot(v, v))
    if vnorm == 0.0:
        return None, alpha
    return v / vnorm, alpha


def _house_qr(A):
    """Unpivoted thin Householder QR: returns (Q, R) with A = Q @ R."""
    m, n = A.shape
    R = A.copy()
    Q = np.eye(m)
    for k in range(min(m, n)):
        v, alpha = _house_vector(R[k:, k])
        if v is None:
            continue
        R[k:, k:] -= 2.0 * np.outer(v, v @ R[k:, k:])
        R[k:, k] = 0.0
        R[k, k] = alpha
        Q[:, k:] -= 2.0 * np.outer(Q[:, k:] @ v, v)
    return Q[:, : min(m, n)], R[: min(m, n), :]


def householder_lstsq(A, B, rcond=1e-10):
    """Least-squares min ||A X - B||_F via column-pivoted Householder QR.

    Returns (X, rank). Rank-deficient systems (diagonal of R below
    rcond*||A||_F) get the minimum-norm solution through a complete
    orthogonal decomposition.
    """
    A = np.array(A, dtype=np.float64)
    B = np.array(B, dtype=np.float64)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    m, n = A.shape
    R = A.copy()
    Qtb = B.copy()
    piv = np.arange(n)
    tol = rcond * np.sqrt((A * A).sum())
    rank = min(m, n)
    for k in range(min(m, n)):
        norms = np.sqrt((R[k:, k:] * R[k:, k:]).sum(axis=0))
        j = int(np.argmax(norms)) + k
        if j != k:
            R[:, [k, j]] = R[:, [j, k]]
            piv[[k, j]] = piv[[j, k]]
        v, alpha = _house_vector(R[k:, k])
        if abs(alpha) <= tol:
            rank = k
            break
        if v is not None:
            R[k:, k:] -= 2.0 * np.outer(v, v @ R[k:, k:])
            Qtb[k:, :] -= 2.0 * np.outer(v, v @ Qtb[k:, :])
        R[k:, k] = 0.0
        R[k, k] = alpha
    X = np.zeros((n, B.shape[1]))
    if rank > 0:
        C = Qtb[:rank, :]
        if rank == n:
            # back substitution on the upper-triangular system
            for i in range(rank - 1, -1, -1):
                X[i] = (C[i] - R[i, i + 1 : rank] @ X[i + 1 : rank]) / R[i, i]
        else:
            # minimum-norm: R1 = T' Q2' with R1 = R[:rank, :] (rank x n)
            Q2, T = _house_qr(R[:rank, :].T)
            Z = np.zeros((rank, B.shape[1]))
            Tt = T[:rank, :rank].T  # lower triangular
            for i in range(rank):
                Z[i] = (C[i] - Tt[i, :i] @ Z[:i]) / Tt[i, i]
            Xp = Q2[:, :rank] @ Z
            X = Xp
    out = np.zeros_like(X)
    out[piv] = X
    if squeeze:
        out = out[:, 0]
    return out, int(rank)


def cholesky_solve(A, B):
    """Solve SPD A X = B by in-house Cholesky; returns None on a bad pivot."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0.0 or not np.isfinite(d):
            return None
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    Z = np.zeros_like(B)
    for i in range(n):
        Z[i] = (B[i] - L[i, :i] @ Z[:i]) / L[i, i]
    X = np.zeros_like(B)
    for i in range(n - 1, -1, -1):
        X[i] = (Z[i] - L[i + 1 :, i] @ X[i + 1 :]) / L[i, i]
    return X


def jacobi_eigh(S, tol=1e-12, max_sweeps=100):
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    Returns (w ascending, V with orthonormal columns, S ~= V diag(w) V').
    Iterates until the off-diagonal Frobenius norm is below tol*||S||_F.
    """
    S = np.array(S, dtype=np.float64)
    n = S.shape[0]
    V = np.eye(n)
    norm0 = np.sqrt((S * S).sum())
    if norm0 == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = np.sqrt(max((S * S).sum() - (np.diag(S) ** 2).sum(), 0.0))
        if off <= tol * norm0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if abs(apq) <= 0.1 * tol * norm0 / n:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * S[p, :] - s * S[q, :]
                rot_q = s * S[p, :] + c * S[q, :]
                S[p, :], S[q, :] = rot_p, rot_q
                col_p = c * S[:, p] - s * S[:, q]
                col_q = s * S[:, p] + c * S[:, q]
                S[:, p], S[:, q] = col_p, col_q
                vp = c * V[:, p] - s * V[:, q]
                vq = s * V[:, p] + c * V[:, q]
                V[:, p], V[:, q] = vp, vq
    w = np.diag(S).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def signed_norm_sums(phi, signs, zbatch):
    """For each direction Z: sum_t signs[t] * ||Z @ phi[:, t]||_2.

    phi: (M, N); signs: (N,) of +-1; zbatch: (B, r, M). Returns (B,).
    """
    phi = np.asarray(phi, dtype=np.float64)
    signs = np.asarray(signs, dtype=np.float64)
    zbatch = np.asarray(zbatch, dtype=np.float64)
    B = zbatch.shape[0]
    out = np.empty(B)
    # chunk to bound memory at ~32MB
    ncol = phi.shape[1]
    chunk = max(1, int(4e6 // max(ncol, 1)))
    for lo in range(0, B, chunk):
        zp = zbatch[lo : lo + chunk] @ phi  # (b, r, N)
        norms = np.sqrt((zp * zp).sum(axis=1))  # (b, N)
        out[lo : lo + chunk] = norms @ signs
    return out


def run_activated(A, B, C, D, x0, U, W, activation, guard):
    """Simulate x' = act(Ax + Bu + w), y = Cx + Du for T steps.

    activation: 0 = tanh, 1 = sgn(x)*log(1+|x|). Returns (X, Y, bad_t) with
    bad_t the first step whose state exceeds guard in absolute value (-1 ok).
    """
    T = U.shape[0]
    n = A.shape[0]
    X = np.empty((T, n))
    Y = np.empty((T, C.shape[0]))
    x = np.array(x0, dtype=np.float64)
    bad_t = -1
    for t in range(T):
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > guard:
            bad_t = t
            break
        X[t] = x
        Y[t] = C @ x + D @ U[t]
        z = A @ x + B @ U[t] + W[t]
        x = np.tanh(z) if activation == 0 else np.sign(z) * np.log1p(np.abs(z))
    return X, Y, bad_t


def run_scalar(rho, L, x0, u, w, use_beta, guard):
    """Simulate the scalar contraction system x' = rho(x+u+w), y = L(x+u).

    With use_beta, the state recursion is x' = beta(rho(x+u+w)) where
    beta(z) = tanh(z)/tanh(1) on [-1, 1] and identity outside.
    """
    T = u.shape[0]
    x_out = np.empty(T)
    y_out = np.empty(T)
    x = float(x0)
    tanh1 = np.tanh(1.0)
    bad_t = -1
    for t in range(T):
        if not np.isfinite(x) or abs(x) > guard:
            bad_t = t
            break
        x_out[t] = x
        y_out[t] = L * (x + u[t])
        z = rho * (x + u[t] + w[t])
        if use_beta and -1.0 <= z <= 1.0:
            z = np.tanh(z) / tanh1
        x = z
    return x_out, y_out, bad_t
