"""Kernel-level tests: QR least squares, Jacobi eig, direction sums, steppers.

Each runs against both backends when the compiled extension is present.
"""

from fractions import Fraction

import numpy as np
import pytest

from robust_sysid import backends
from robust_sysid.backends import pure


def both_backends():
    mods = [pure]
    try:
        mods.append(backends.get_module("compiled"))
    except ImportError:
        pass
    return mods


BACKENDS = both_backends()


def exact_solve_fractions(A_rows, b_rows):
    """Gaussian elimination in exact rational arithmetic (square systems)."""
    n = len(A_rows)
    M = [[Fraction(v) for v in row] + [Fraction(b)] for row, b in zip(A_rows, b_rows)]
    for col in range(n):
        piv = max(range(col, n), key=lambda i: abs(M[i][col]))
        M[col], M[piv] = M[piv], M[col]
        for i in range(n):
            if i != col and M[i][col] != 0:
                f = M[i][col] / M[col][col]
                M[i] = [a - f * b for a, b in zip(M[i], M[col])]
    return [M[i][n] / M[i][i] for i in range(n)]


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.NAME)
class TestLstsq:
    def test_identity_design(self, mod):
        B = np.random.default_rng(0).standard_normal((6, 3))
        X, rank = mod.householder_lstsq(np.eye(6), B)
        assert rank == 6
        np.testing.assert_allclose(X, B, atol=1e-14)

    def test_residual_orthogonality(self, mod):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((50, 25))
        B = rng.standard_normal((50, 4))
        X, rank = mod.householder_lstsq(A, B)
        assert rank == 25
        R = B - A @ X
        assert np.abs(A.T @ R).max() <= 1e-8

    def test_hilbert_vs_rational_oracle(self, mod):
        # consistent ill-conditioned system; exact-arithmetic reference
        n = 8
        H = [[Fraction(1, i + j + 1) for j in range(n)] for i in range(n)]
        x_true = [Fraction(v) for v in (1, -1, 2, -2, 1, 0, 1, -1)]
        b = [sum(H[i][j] * x_true[j] for j in range(n)) for i in range(n)]
        exact = np.array([float(v) for v in exact_solve_fractions(H, b)])
        np.testing.assert_allclose(exact, [float(v) for v in x_true])
        Hf = np.array([[float(v) for v in row] for row in H])
        bf = np.array([float(v) for v in b])
        # sigma_8(H8) ~ 1.1e-10 sits below the default 1e-10*||A|| cutoff;
        # solve at a tighter cutoff to exercise the full-rank path
        X, rank = mod.householder_lstsq(Hf, bf, 1e-13)
        assert rank == n
        rel = np.abs(X - exact).max() / np.abs(exact).max()
        assert rel <= 1e-4
        # at the default cutoff the system truncates (documented behavior)
        _, rank_default = mod.householder_lstsq(Hf, bf)
        assert rank_default < n

    def test_minimum_norm_on_rank_deficiency(self, mod):
        rng = np.random.default_rng(2)
        base = rng.standard_normal((30, 3))
        A = np.column_stack([base, base @ np.array([1.0, -2.0, 0.5])])
        B = rng.standard_normal((30, 2))
        X, rank = mod.householder_lstsq(A, B)
        assert rank == 3
        # residual is least-squares optimal and X has minimal Frobenius norm
        ref = np.linalg.lstsq(A, B, rcond=1e-10)[0]
        np.testing.assert_allclose(X, ref, atol=1e-10)

    def test_underdetermined(self, mod):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((4, 9))
        b = rng.standard_normal(4)
        X, rank = mod.householder_lstsq(A, b)
        assert rank == 4
        np.testing.assert_allclose(A @ X, b, atol=1e-10)
        ref = np.linalg.lstsq(A, b, rcond=None)[0]
        assert np.linalg.norm(X) <= np.linalg.norm(ref) * (1 + 1e-10)


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.NAME)
class TestJacobi:
    def test_diagonal(self, mod):
        d = np.array([3.0, -1.0, 2.0, 0.0])
        w, V = mod.jacobi_eigh(np.diag(d))
        np.testing.assert_allclose(w, np.sort(d), atol=1e-14)

    def test_two_by_two_closed_form(self, mod):
        a, b, d = 1.3, -0.7, 2.9
        S = np.array([[a, b], [b, d]])
        w, V = mod.jacobi_eigh(S)
        mid = (a + d) / 2
        rad = np.sqrt(((a - d) / 2) ** 2 + b * b)
        np.testing.assert_allclose(w, [mid - rad, mid + rad], atol=1e-12)

    def test_orthonormal_and_reconstructs(self, mod):
        rng = np.random.default_rng(4)
        S = rng.standard_normal((25, 25))
        S = S + S.T
        w, V = mod.jacobi_eigh(S)
        assert np.abs(V.T @ V - np.eye(25)).max() <= 1e-10
        np.testing.assert_allclose(V @ np.diag(w) @ V.T, S, atol=1e-9)
        assert np.all(np.diff(w) >= -1e-12)


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.NAME)
def test_cholesky_solve(mod):
    rng = np.random.default_rng(9)
    Q = rng.standard_normal((8, 8))
    A = Q @ Q.T + 8 * np.eye(8)
    B = rng.standard_normal((8, 3))
    X = mod.cholesky_solve(A, B)
    np.testing.assert_allclose(A @ X, B, atol=1e-10)
    # indefinite matrix is refused
    assert mod.cholesky_solve(np.diag([1.0, -1.0]), np.ones((2, 1))) is None


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.NAME)
def test_signed_norm_sums_vs_naive(mod):
    rng = np.random.default_rng(5)
    phi = rng.standard_normal((6, 40))
    signs = rng.choice([-1.0, 1.0], size=40)
    Z = rng.standard_normal((7, 3, 6))
    got = mod.signed_norm_sums(phi, signs, Z)
    want = np.array([
        sum(signs[t] * np.linalg.norm(Z[b] @ phi[:, t]) for t in range(40))
        for b in range(7)
    ])
    np.testing.assert_allclose(got, want, rtol=1e-12)


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.NAME)
def test_steppers_match_reference(mod):
    rng = np.random.default_rng(6)
    n, m, r, T = 5, 2, 3, 30
    A = rng.standard_normal((n, n)) * 0.2
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((r, n))
    D = rng.standard_normal((r, m))
    x0 = rng.standard_normal(n)
    U = rng.standard_normal((T, m))
    W = np.zeros((T, n))
    W[7] = 5.0
    for act_id, act in ((0, np.tanh), (1, lambda z: np.sign(z) * np.log1p(np.abs(z)))):
        X, Y, bad = mod.run_activated(A, B, C, D, x0, U, W, act_id, 1e12)
        assert bad == -1
        x = x0.copy()
        for t in range(T):
            np.testing.assert_allclose(X[t], x, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(Y[t], C @ x + D @ U[t], rtol=1e-12, atol=1e-12)
            x = act(A @ x + B @ U[t] + W[t])
    xs, ys, bad = mod.run_scalar(0.5, 2.0, 1.5, U[:, 0], W[:, 0], False, 1e12)
    assert bad == -1
    x = 1.5
    for t in range(T):
        assert abs(xs[t] - x) < 1e-12
        assert abs(ys[t] - 2.0 * (x + U[t, 0])) < 1e-12
        x = 0.5 * (x + U[t, 0] + W[t, 0])


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.NAME)
def test_stepper_overflow_reports_first_bad_step(mod):
    xs, ys, bad = mod.run_scalar(0.5, 1.0, 5e12, np.zeros(10), np.zeros(10), False, 1e12)
    assert bad == 0
    X, Y, bad = mod.run_activated(
        np.eye(2) * 0.5, np.zeros((2, 1)), np.eye(2), np.zeros((2, 1)),
        np.array([2e12, 0.0]), np.zeros((5, 1)), np.zeros((5, 2)), 1, 1e12,
    )
    assert bad == 0


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_backend_parity():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((60, 12))
    B = rng.standard_normal((60, 5))
    X1, r1 = BACKENDS[0].householder_lstsq(A, B)
    X2, r2 = BACKENDS[1].householder_lstsq(A, B)
    assert r1 == r2
    np.testing.assert_allclose(X1, X2, atol=1e-12)
    S = rng.standard_normal((10, 10))
    S = S + S.T
    w1, _ = BACKENDS[0].jacobi_eigh(S)
    w2, _ = BACKENDS[1].jacobi_eigh(S)
    np.testing.assert_allclose(w1, w2, atol=1e-12)
