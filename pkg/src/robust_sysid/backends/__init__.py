"""Backend selection: compiled Cython kernels when available, numpy fallback.

Set ROBUST_SYSID_BACKEND=pure|compiled to force a choice; forcing `compiled`
raises if the extension is missing.
"""

from __future__ import annotations

import os

import numpy as np

from robust_sysid.backends import pure as _pure

_forced = os.environ.get("ROBUST_SYSID_BACKEND", "").strip().lower()
_impl = None
if _forced in ("", "compiled"):
    try:
        from robust_sysid import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _forced == "compiled":
            raise ImportError(
                "ROBUST_SYSID_BACKEND=compiled but robust_sysid._kernels is not built; "
                "run `pip install -e . --no-build-isolation` or `python setup.py build_ext --inplace`"
            )
        _impl = None
elif _forced != "pure":
    raise ValueError(f"unknown ROBUST_SYSID_BACKEND={_forced!r} (use 'pure' or 'compiled')")
if _impl is None:
    _impl = _pure

BACKEND_NAME: str = _impl.NAME


def get_module(name: str | None = None):
    """Return a backend module by name ('pure'/'compiled'), default selected."""
    if name is None:
        return _impl
    if name == "pure":
        return _pure
    if name == "compiled":
        from robust_sysid import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def lstsq(A, B, rcond: float = 1e-10):
    """Minimum-residual (and minimum-norm on rank deficiency) solve of AX=B."""
    return _impl.householder_lstsq(np.asarray(A, dtype=np.float64), np.asarray(B, dtype=np.float64), rcond)


def eigh(S, tol: float = 1e-12, max_sweeps: int = 100):
    """Symmetric eigendecomposition (ascending) via Jacobi rotations."""
    return _impl.jacobi_eigh(np.asarray(S, dtype=np.float64), tol, max_sweeps)


def cholesky_solve(A, B):
    """SPD solve via in-house Cholesky; None when not positive definite."""
    return _impl.cholesky_solve(np.asarray(A, dtype=np.float64), np.asarray(B, dtype=np.float64))


def signed_norm_sums(phi, signs, zbatch):
    """sum_t signs[t]*||Z phi_t||_2 for a batch of direction matrices Z."""
    return _impl.signed_norm_sums(phi, signs, zbatch)


def run_activated(A, B, C, D, x0, U, W, activation: int, guard: float):
    return _impl.run_activated(A, B, C, D, x0, U, W, activation, guard)


def run_scalar(rho: float, L: float, x0: float, u, w, use_beta: bool, guard: float):
    return _impl.run_scalar(rho, L, x0, u, w, use_beta, guard)
