# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled numeric kernels (Householder QR, Jacobi eig, direction sums,
trajectory steppers). Mirrors robust_sysid.backends.pure."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, tanh, log1p, isfinite

cnp.import_array()

NAME = "compiled"


def householder_lstsq(object A_in, object B_in, double rcond=1e-10):
    A0 = np.array(A_in, dtype=np.float64, order="C")
    B0 = np.array(B_in, dtype=np.float64, order="C")
    squeeze = B0.ndim == 1
    if squeeze:
        B0 = B0[:, None]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = A0.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Qtb = B0.copy()
    cdef Py_ssize_t m = R.shape[0], n = R.shape[1], nrhs = Qtb.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] piv = np.arange(n, dtype=np.int64)
    cdef double tol = rcond * sqrt(float((A0 * A0).sum()))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.zeros(m)
    cdef Py_ssize_t k, i, j, best, rank = min(m, n)
    cdef double nrm, alpha, vnorm, dot, best_norm, tmp
    for k in range(min(m, n)):
        # column pivot: largest trailing norm
        best = k
        best_norm = -1.0
        for j in range(k, n):
            nrm = 0.0
            for i in range(k, m):
                nrm += R[i, j] * R[i, j]
            if nrm > best_norm:
                best_norm = nrm
                best = j
        if best != k:
            for i in range(m):
                tmp = R[i, k]; R[i, k] = R[i, best]; R[i, best] = tmp
            piv[k], piv[best] = piv[best], piv[k]
        nrm = 0.0
        for i in range(k, m):
            nrm += R[i, k] * R[i, k]
        nrm = sqrt(nrm)
        alpha = -nrm if R[k, k] >= 0 else nrm
        if fabs(alpha) <= tol:
            rank = k
            break
        for i in range(k, m):
            v[i] = R[i, k]
        v[k] -= alpha
        vnorm = 0.0
        for i in range(k, m):
            vnorm += v[i] * v[i]
        vnorm = sqrt(vnorm)
        if vnorm > 0.0:
            for i in range(k, m):
                v[i] /= vnorm
            for j in range(k, n):
                dot = 0.0
                for i in range(k, m):
                    dot += v[i] * R[i, j]
                dot *= 2.0
                for i in range(k, m):
                    R[i, j] -= dot * v[i]
            for j in range(nrhs):
                dot = 0.0
                for i in range(k, m):
                    dot += v[i] * Qtb[i, j]
                dot *= 2.0
                for i in range(k, m):
                    Qtb[i, j] -= dot * v[i]
        for i in range(k + 1, m):
            R[i, k] = 0.0
        R[k, k] = alpha

    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.zeros((n, nrhs))
    cdef double acc
    if rank == n and rank > 0:
        for j in range(nrhs):
            for i in range(rank - 1, -1, -1):
                acc = Qtb[i, j]
                for k in range(i + 1, rank):
                    acc -= R[i, k] * X[k, j]
                X[i, j] = acc / R[i, i]
    elif rank > 0:
        # cold path: minimum-norm via complete orthogonal decomposition
        from robust_sysid.backends import pure as _pure
        R1 = np.asarray(R)[:rank, :]
        Q2, T = _pure._house_qr(R1.T.copy())
        C = np.asarray(Qtb)[:rank, :]
        Tt = T[:rank, :rank].T
        Z = np.zeros((rank, nrhs))
        for i in range(rank):
            Z[i] = (C[i] - Tt[i, :i] @ Z[:i]) / Tt[i, i]
        X = np.ascontiguousarray(Q2[:, :rank] @ Z)
    out = np.zeros((n, nrhs))
    out[np.asarray(piv)] = np.asarray(X)
    if squeeze:
        out = out[:, 0]
    return out, int(rank)


def cholesky_solve(object A_in, object B_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.array(A_in, dtype=np.float64, order="C")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] B = np.array(B_in, dtype=np.float64, order="C")
    cdef Py_ssize_t n = A.shape[0], nrhs = B.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] L = np.zeros((n, n))
    cdef Py_ssize_t i, j, k
    cdef double d, acc
    for j in range(n):
        d = A[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d <= 0.0 or not isfinite(d):
            return None
        L[j, j] = sqrt(d)
        for i in range(j + 1, n):
            acc = A[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.zeros((n, nrhs))
    for j in range(nrhs):
        for i in range(n):
            acc = B[i, j]
            for k in range(i):
                acc -= L[i, k] * X[k, j]
            X[i, j] = acc / L[i, i]
        for i in range(n - 1, -1, -1):
            acc = X[i, j]
            for k in range(i + 1, n):
                acc -= L[k, i] * X[k, j]
            X[i, j] = acc / L[i, i]
    return np.asarray(X)


def jacobi_eigh(object S_in, double tol=1e-12, int max_sweeps=100):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] S = np.array(S_in, dtype=np.float64, order="C")
    cdef Py_ssize_t n = S.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.eye(n)
    cdef double norm0 = sqrt(float((np.asarray(S) ** 2).sum()))
    if norm0 == 0.0:
        return np.zeros(n), np.asarray(V)
    cdef double off, apq, theta, t, c, s, sp, sq, skip_tol
    cdef Py_ssize_t sweep, p, q, i
    skip_tol = 0.1 * tol * norm0 / n
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * S[p, q] * S[p, q]
        if sqrt(off) <= tol * norm0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if fabs(apq) <= skip_tol:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                if theta != 0.0:
                    t = (1.0 if theta > 0 else -1.0) / (fabs(theta) + sqrt(theta * theta + 1.0))
                else:
                    t = 1.0
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    sp = c * S[p, i] - s * S[q, i]
                    sq = s * S[p, i] + c * S[q, i]
                    S[p, i] = sp; S[q, i] = sq
                for i in range(n):
                    sp = c * S[i, p] - s * S[i, q]
                    sq = s * S[i, p] + c * S[i, q]
                    S[i, p] = sp; S[i, q] = sq
                for i in range(n):
                    sp = c * V[i, p] - s * V[i, q]
                    sq = s * V[i, p] + c * V[i, q]
                    V[i, p] = sp; V[i, q] = sq
    w = np.diag(np.asarray(S)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], np.asarray(V)[:, order]


def signed_norm_sums(object phi_in, object signs_in, object zbatch_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] phi = np.ascontiguousarray(phi_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] signs = np.ascontiguousarray(signs_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] zb = np.ascontiguousarray(zbatch_in, dtype=np.float64)
    cdef Py_ssize_t M = phi.shape[0], N = phi.shape[1]
    cdef Py_ssize_t B = zb.shape[0], r = zb.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(B)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zp = np.zeros(r)
    cdef Py_ssize_t b, t, i, j
    cdef double acc, total, e
    for b in range(B):
        total = 0.0
        for t in range(N):
            acc = 0.0
            for i in range(r):
                e = 0.0
                for j in range(M):
                    e += zb[b, i, j] * phi[j, t]
                acc += e * e
            total += signs[t] * sqrt(acc)
        out[b] = total
    return out


def run_activated(object A_in, object B_in, object C_in, object D_in,
                  object x0_in, object U_in, object W_in, int activation, double guard):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.ascontiguousarray(A_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Bm = np.ascontiguousarray(B_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Cm = np.ascontiguousarray(C_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Dm = np.ascontiguousarray(D_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.array(x0_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] U = np.ascontiguousarray(U_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W = np.ascontiguousarray(W_in, dtype=np.float64)
    cdef Py_ssize_t T = U.shape[0], n = A.shape[0], m = Bm.shape[1], robs = Cm.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.empty((T, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Y = np.empty((T, robs))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(n)
    cdef Py_ssize_t t, i, j
    cdef double acc, mx
    cdef long bad_t = -1
    for t in range(T):
        mx = 0.0
        for i in range(n):
            if not isfinite(x[i]):
                mx = guard * 2.0
                break
            if fabs(x[i]) > mx:
                mx = fabs(x[i])
        if mx > guard:
            bad_t = t
            break
        for i in range(n):
            X[t, i] = x[i]
        for i in range(robs):
            acc = 0.0
            for j in range(n):
                acc += Cm[i, j] * x[j]
            for j in range(m):
                acc += Dm[i, j] * U[t, j]
            Y[t, i] = acc
        for i in range(n):
            acc = W[t, i]
            for j in range(n):
                acc += A[i, j] * x[j]
            for j in range(m):
                acc += Bm[i, j] * U[t, j]
            z[i] = acc
        if activation == 0:
            for i in range(n):
                x[i] = tanh(z[i])
        else:
            for i in range(n):
                x[i] = log1p(fabs(z[i])) if z[i] >= 0 else -log1p(fabs(z[i]))
                if z[i] == 0.0:
                    x[i] = 0.0
    return np.asarray(X), np.asarray(Y), bad_t


def run_scalar(double rho, double L, double x0, object u_in, object w_in,
               bint use_beta, double guard):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t T = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.empty(T)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ys = np.empty(T)
    cdef double x = x0, z, tanh1 = tanh(1.0)
    cdef long bad_t = -1
    cdef Py_ssize_t t
    for t in range(T):
        if not isfinite(x) or fabs(x) > guard:
            bad_t = t
            break
        xs[t] = x
        ys[t] = L * (x + u[t])
        z = rho * (x + u[t] + w[t])
        if use_beta and -1.0 <= z <= 1.0:
            z = tanh(z) / tanh1
        x = z
    return np.asarray(xs), np.asarray(ys), bad_t
