"""Sum-of-norm solvers: recovery, certificates, brute-force equivalence."""

import math

import numpy as np
import pytest

from robust_sysid.estimators import (
    NumericalError,
    RegressionProblem,
    SolverConfig,
    brute_force_scan_1d,
    l2_stationarity,
    objective_value,
    qr_least_squares,
    solve,
    symmetric_eig,
)

ALL_NORMS = ("l1", "l2", "linf", "squared_l2")


def make_noiseless(seed=0, M=6, r=3, N=80):
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((M, N))
    G = rng.standard_normal((r, M))
    return F, G @ F, G


class TestSolve:
    @pytest.mark.parametrize("norm", ALL_NORMS)
    def test_noiseless_exact_recovery(self, norm):
        F, Y, G = make_noiseless()
        rep = solve(RegressionProblem(features=F, targets=Y, norm=norm), G_star=G)
        assert rep.frob_error <= 1e-6
        assert rep.converged

    def test_median_instance(self):
        # targets {0, 0, 10} with phi == 1: l1 (== l2 == linf at r=1)
        # minimizer is the median 0; squared-l2 is the mean 10/3
        F = np.ones((1, 3))
        Y = np.array([[0.0, 0.0, 10.0]])
        for norm in ("l1", "l2", "linf"):
            rep = solve(RegressionProblem(features=F, targets=Y, norm=norm))
            assert abs(rep.G_hat[0, 0]) <= 2e-4, norm
        rep = solve(RegressionProblem(features=F, targets=Y, norm="squared_l2"))
        assert rep.G_hat[0, 0] == pytest.approx(10.0 / 3.0, abs=1e-10)

    @pytest.mark.parametrize("norm", ("l1", "l2", "linf"))
    def test_brute_force_grid_equivalence(self, norm):
        # unique-minimizer 1-D instances; solver matches a 1e-4 scan
        rng = np.random.default_rng(4)
        f = rng.uniform(0.5, 2.0, 25)
        g_true = 0.7
        y = g_true * f
        y[::5] += rng.uniform(3.0, 8.0, 5)  # one-sided outliers
        F, Y = f[None, :], y[None, :]
        rep = solve(RegressionProblem(features=F, targets=Y, norm=norm))
        scan = brute_force_scan_1d(F, Y, norm, -2.0, 5.0, 1e-4)
        assert abs(rep.G_hat[0, 0] - scan) <= 1.5e-4

    def test_objective_matches_recomputation(self):
        F, Y, G = make_noiseless(2)
        Y = Y + np.random.default_rng(3).standard_normal(Y.shape)
        for norm in ALL_NORMS:
            rep = solve(RegressionProblem(features=F, targets=Y, norm=norm))
            want = objective_value(F, Y, rep.G_hat, norm)
            assert abs(rep.objective - want) <= 1e-9 * max(1.0, abs(want))

    def test_l2_stationarity_certificate(self):
        rng = np.random.default_rng(5)
        F = rng.standard_normal((5, 200))
        G0 = rng.standard_normal((3, 5))
        Y = G0 @ F + rng.standard_normal((3, 200))
        Y[:, ::7] += 50.0  # heavy outlier columns
        rep = solve(RegressionProblem(features=F, targets=Y, norm="l2"))
        assert rep.stationarity <= 1e-5 * rep.stationarity_scale

    @pytest.mark.parametrize("norm", ALL_NORMS)
    def test_scale_equivariance(self, norm):
        rng = np.random.default_rng(6)
        F = rng.standard_normal((4, 120))
        Y = rng.standard_normal((2, 120)) * 5.0 + 3.0  # residuals stay >> eps
        s = 7.5
        rep1 = solve(RegressionProblem(features=F, targets=Y, norm=norm))
        rep2 = solve(RegressionProblem(features=F, targets=s * Y, norm=norm))
        np.testing.assert_allclose(rep2.G_hat, s * rep1.G_hat, rtol=1e-8, atol=1e-10)

    def test_l2_outlier_robust_vs_squared(self):
        # corrupted columns pull the least-squares fit but not the l2 fit
        rng = np.random.default_rng(7)
        F = rng.standard_normal((4, 400))
        G0 = rng.standard_normal((2, 4))
        Y = G0 @ F
        Y[:, ::11] += 100.0
        rep_l2 = solve(RegressionProblem(features=F, targets=Y, norm="l2"), G_star=G0)
        rep_ls = solve(RegressionProblem(features=F, targets=Y, norm="squared_l2"), G_star=G0)
        assert rep_l2.frob_error < 0.2 * rep_ls.frob_error

    def test_rank_deficiency_flagged(self):
        rng = np.random.default_rng(8)
        base = rng.standard_normal((2, 50))
        F = np.vstack([base, base.sum(axis=0, keepdims=True)])
        Y = rng.standard_normal((1, 50))
        rep = solve(RegressionProblem(features=F, targets=Y, norm="squared_l2"))
        assert rep.rank_deficient

    def test_iteration_cap_reported(self):
        rng = np.random.default_rng(9)
        F = rng.standard_normal((3, 60))
        Y = rng.standard_normal((2, 60))
        rep = solve(RegressionProblem(features=F, targets=Y, norm="l2"),
                    SolverConfig(max_iters=1, rel_tol=1e-16))
        assert not rep.converged and rep.iters == 1

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            RegressionProblem(features=np.array([[np.nan]]), targets=np.array([[1.0]]), norm="l2")


class TestQrLeastSquares:
    def test_identity_design(self):
        B = np.random.default_rng(0).standard_normal((7, 2))
        X, rank = qr_least_squares(np.eye(7), B)
        np.testing.assert_allclose(X, B, atol=1e-14)

    def test_orthogonality_certificate(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((50, 25))
        B = rng.standard_normal((50, 3))
        X, _ = qr_least_squares(A, B)
        assert np.abs(A.T @ (B - A @ X)).max() <= 1e-8

    def test_rejects_non_finite(self):
        with pytest.raises(NumericalError):
            qr_least_squares(np.array([[np.inf, 1.0]]), np.array([1.0]))


class TestSymmetricEig:
    def test_diagonal_sorted(self):
        w, V = symmetric_eig(np.diag([2.0, -1.0, 0.5]))
        np.testing.assert_allclose(w, [-1.0, 0.5, 2.0], atol=1e-14)

    def test_closed_form_2x2(self):
        a, b, d = 0.3, 1.1, -0.4
        w, _ = symmetric_eig(np.array([[a, b], [b, d]]))
        mid, rad = (a + d) / 2, math.sqrt(((a - d) / 2) ** 2 + b * b)
        np.testing.assert_allclose(w, [mid - rad, mid + rad], atol=1e-12)

    def test_pair_gram_min_eig_bound(self):
        # Gram [[g, g], [g, g + k2]] has min eig >= k2/3 whenever g >= k2
        rho, L, tau = 0.5, 1.0, 5
        c = abs(1 - math.tanh(rho) / (rho * math.tanh(1.0)))
        g = L**2 * sum(rho ** (2 * i) for i in range(tau + 1))
        k2 = (L * rho**tau * c) ** 2
        w, _ = symmetric_eig(np.array([[g, g], [g, g + k2]]))
        assert w[0] >= k2 / 3.0
        # closed form: mu_min = (2g + k2 - sqrt(4 g^2 + k2^2)) / 2
        mu = (2 * g + k2 - math.sqrt(4 * g * g + k2 * k2)) / 2
        np.testing.assert_allclose(w[0], mu, rtol=1e-10)

    def test_asymmetry_rejected(self):
        with pytest.raises(ValueError):
            symmetric_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
