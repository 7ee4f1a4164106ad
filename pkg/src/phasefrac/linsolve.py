"""Sparse symmetric linear solves for the Newton systems.

A deterministic direct LU factorisation is the default; a Jacobi-
preconditioned conjugate-gradient fallback is available for larger
meshes.  ``check_spd`` estimates matrix definiteness from the diagonal
of a symmetric-mode factorisation, which the staggered driver uses to
drop the (negative) fast-scheme stiffness augmentation when it would
destroy positive definiteness.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla


class SingularSystemError(RuntimeError):
    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


def factor(matrix: sparse.spmatrix):
    """LU-factorise a sparse matrix; raises SingularSystemError on failure."""
    try:
        lu = spla.splu(matrix.tocsc())
    except RuntimeError as exc:  # SuperLU reports "Factor is exactly singular"
        idx = _first_zero_diag(matrix)
        raise SingularSystemError(f"singular matrix: {exc}", pivot_index=idx) from exc
    udiag = lu.U.diagonal()
    if np.any(udiag == 0.0) or not np.all(np.isfinite(udiag)):
        idx = int(np.argmin(np.abs(udiag)))
        raise SingularSystemError("zero pivot in factorisation", pivot_index=idx)
    return lu


def _first_zero_diag(matrix: sparse.spmatrix) -> int | None:
    diag = matrix.diagonal()
    zero = np.flatnonzero(diag == 0.0)
    return int(zero[0]) if len(zero) else None


def factor_solve(matrix: sparse.spmatrix, rhs: np.ndarray, method: str = "direct") -> np.ndarray:
    """Solve ``matrix @ x = rhs`` deterministically."""
    if method == "direct":
        return factor(matrix).solve(rhs)
    if method == "cg":
        inv_diag = 1.0 / matrix.diagonal()
        precond = spla.LinearOperator(matrix.shape, matvec=lambda v: inv_diag * v)
        x, info = spla.cg(matrix, rhs, rtol=1e-12, atol=0.0, maxiter=20 * matrix.shape[0], M=precond)
        if info != 0:
            raise SingularSystemError(f"cg failed to converge (info={info})")
        return x
    raise ValueError(f"unknown method {method!r}")


def check_spd(matrix: sparse.spmatrix) -> float:
    """Smallest pivot of a no-pivoting symmetric factorisation.

    A non-positive return value flags an indefinite (or singular)
    matrix.  With ``diag_pivot_thresh=0`` SuperLU keeps the diagonal
    pivot order, so the U diagonal carries the inertia of a symmetric
    matrix like an LDL^T factorisation would.
    """
    try:
        lu = spla.splu(
            matrix.tocsc(),
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError:
        return -np.inf
    udiag = lu.U.diagonal()
    if np.any(~np.isfinite(udiag)):
        return -np.inf
    return float(udiag.min())
