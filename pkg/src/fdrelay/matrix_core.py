"""Dense complex-matrix kernels shared by the beamforming and covariance code.

Conventions used throughout the package:

* ``vec`` stacks columns (Fortran order), so ``vec(A X B) = (B^T kron A) vec(X)``.
* Matrices are ``numpy.ndarray`` with dtype ``complex128``; all functions here
  are pure and never mutate their arguments.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg.lapack import zgecon, zgetrf, zgetrs

__all__ = [
    "SingularSystemError",
    "vec",
    "mat",
    "kron",
    "solve_linear",
    "solve_sylvester_sum",
    "chained_error_trace_mean",
    "frobenius_sq",
]

# Relative condition number above which a linear system is treated as singular
# instead of being silently regularized.
CONDITION_LIMIT = 1e12

# solve_linear refines only when the first solve misses this relative
# residual; the public contract promises _RESIDUAL_LIMIT.
_RESIDUAL_TARGET = 1e-11
_RESIDUAL_LIMIT = 1e-10
_MAX_REFINEMENTS = 4


class SingularSystemError(np.linalg.LinAlgError):
    """Linear system is singular to working tolerance.

    Carries ``condition`` (an estimate of the 1-norm condition number, possibly
    ``inf``) so callers can report how degenerate the system was.
    """

    def __init__(self, condition: float, message: str = ""):
        self.condition = float(condition)
        super().__init__(message or f"singular system (condition estimate {condition:.3e})")


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"vec expects a matrix, got ndim={a.ndim}")
    return a.reshape(-1, order="F")


def mat(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`: reshape a column-stacked vector to rows x cols."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"mat expects a vector, got ndim={v.ndim}")
    if v.size != rows * cols:
        raise ValueError(f"cannot reshape length-{v.size} vector to {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices.

    Broadcast-based; noticeably faster than numpy's generic kron at the small
    sizes this package solves in its inner loop.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects two matrices")
    ra, ca = a.shape
    rb, cb = b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def frobenius_sq(a: np.ndarray) -> float:
    """Squared Frobenius norm, returned as a real float."""
    a = np.asarray(a)
    return float(np.real(np.vdot(a, a)))


def solve_linear(k: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``K x = b`` for square K with iterative refinement.

    Guarantees ``||K x - b|| <= 1e-10 ||b||`` on success.  Raises
    :class:`SingularSystemError` when K is singular to tolerance (1-norm
    condition estimate above ``CONDITION_LIMIT``) or the residual target cannot
    be met.
    """
    k = np.asarray(k, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"solve_linear expects a square matrix, got shape {k.shape}")
    if b.shape != (k.shape[0],):
        raise ValueError(f"rhs shape {b.shape} incompatible with matrix {k.shape}")

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b)

    anorm = float(np.abs(k).sum(axis=0).max())
    lu, piv, info = zgetrf(k)
    if info > 0:
        raise SingularSystemError(np.inf, "exactly singular system")
    if info < 0:
        raise ValueError(f"illegal value in LU factorization (argument {-info})")
    rcond, _ = zgecon(lu, anorm, norm="1")
    condition = np.inf if rcond == 0.0 else 1.0 / float(rcond)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularSystemError(condition)

    x, _ = zgetrs(lu, piv, b)
    for _ in range(_MAX_REFINEMENTS):
        residual = b - k @ x
        if np.linalg.norm(residual) <= _RESIDUAL_TARGET * b_norm:
            break
        dx, _ = zgetrs(lu, piv, residual)
        x = x + dx

    if not np.all(np.isfinite(x)) or np.linalg.norm(b - k @ x) > _RESIDUAL_LIMIT * b_norm:
        raise SingularSystemError(condition, "residual target unreachable")
    return x


def solve_sylvester_sum(pairs, rhs: np.ndarray) -> np.ndarray:
    """Solve ``sum_i A_i X B_i = C`` by vectorization.

    ``pairs`` is an iterable of ``(A_i, B_i)`` with A_i square of the row
    dimension of C and B_i square of its column dimension.  The vectorized
    system matrix is ``sum_i (B_i^T kron A_i)``.
    """
    rhs = np.asarray(rhs, dtype=complex)
    rows, cols = rhs.shape
    k = np.zeros((rows * cols, rows * cols), dtype=complex)
    for a_i, b_i in pairs:
        a_i = np.asarray(a_i, dtype=complex)
        b_i = np.asarray(b_i, dtype=complex)
        if a_i.shape != (rows, rows) or b_i.shape != (cols, cols):
            raise ValueError(
                f"coefficient shapes {a_i.shape}/{b_i.shape} incompatible with rhs {rhs.shape}"
            )
        k += np.kron(b_i.T, a_i)
    x = solve_linear(k, vec(rhs))
    return mat(x, rows, cols)


def chained_error_trace_mean(v_list, sigma_sq: float) -> float:
    """Mean of the traced square of an alternating error/deterministic chain.

    For independent N x N random matrices ``D_1 .. D_{v-1}`` whose vectorized
    second moment is ``sigma_sq * I``, and deterministic ``V_1 .. V_v``, the
    quantity

        E tr{ V_v (D_{v-1} V_{v-1}) ... (D_1 V_1) (V_1^H D_1^H) ... V_v^H }

    collapses to ``sigma_sq^(v-1) * prod_j tr(V_j V_j^H)``.  This is the
    closed form used for all residual self-interference covariances; its
    sampling counterpart lives in :mod:`fdrelay.validation`.
    """
    mats = [np.asarray(v, dtype=complex) for v in v_list]
    if len(mats) < 2:
        raise ValueError("need at least two chain matrices")
    n = mats[0].shape[0]
    for m in mats:
        if m.shape != (n, n):
            raise ValueError(f"all chain matrices must be {n}x{n}, got {m.shape}")
    value = float(sigma_sq) ** (len(mats) - 1)
    for m in mats:
        value *= frobenius_sq(m)
    return value
