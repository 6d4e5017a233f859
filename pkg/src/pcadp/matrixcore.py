"""Dense real-matrix kernels: product, symmetric eigendecomposition, SPD solve.

Matrices are plain 2-D float64 numpy arrays (row-major). All operations are
pure functions on their inputs and return freshly allocated results, so
values can be shared read-only across threads.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, RejectedInput, SingularityError

# Cyclic Jacobi stops once the off-diagonal Frobenius norm falls below
# JACOBI_OFF_TOL * ||S||_F, and gives up after JACOBI_SWEEP_CAP sweeps.
JACOBI_OFF_TOL = 1e-12
JACOBI_SWEEP_CAP = 100

# Largest absolute asymmetry tolerated by sym_eigen before rejecting.
SYMMETRY_TOL = 1e-9


def as_matrix(a, name="matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise RejectedInput(f"{name} must be 2-D, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise RejectedInput(f"{name} contains NaN or Inf entries")
    return arr


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues in non-increasing order; eigenvectors[:, i] pairs with eigenvalues[i]."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def mat_mul(a, b) -> np.ndarray:
    """Matrix product a @ b with explicit dimension checking."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise RejectedInput(
            f"dimension mismatch: ({a.shape[0]}x{a.shape[1]}) x ({b.shape[0]}x{b.shape[1]})"
        )
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise RejectedInput("matrix product overflowed to non-finite values")
    return out


def _off_diagonal_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def _fix_column_signs(v: np.ndarray) -> np.ndarray:
    """Flip column signs so each column's largest-magnitude entry is positive.

    Removes the sign ambiguity of eigenvectors and makes results
    reproducible across runs and platforms.
    """
    idx = np.argmax(np.abs(v), axis=0)
    flip = v[idx, np.arange(v.shape[1])] < 0.0
    v = v.copy()
    v[:, flip] *= -1.0
    return v


def sym_eigen(s) -> EigenResult:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    The input may be asymmetric up to SYMMETRY_TOL (max-norm); it is
    symmetrized by averaging before iteration. Eigenvalues come back in
    non-increasing order (stable sort, preserving rotation output order on
    ties) with orthonormal eigenvector columns.
    """
    s = as_matrix(s, "s")
    n, m = s.shape
    if n != m:
        raise RejectedInput(f"sym_eigen needs a square matrix, got {n}x{m}")
    asym = float(np.max(np.abs(s - s.T))) if n else 0.0
    if asym > SYMMETRY_TOL:
        raise RejectedInput(f"matrix asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")

    a = 0.5 * (s + s.T)
    v = np.eye(n)
    threshold = JACOBI_OFF_TOL * float(np.linalg.norm(a))

    sweeps = 0
    off = _off_diagonal_norm(a)
    while off > threshold:
        if sweeps >= JACOBI_SWEEP_CAP:
            raise ConvergenceError(
                f"Jacobi did not converge in {JACOBI_SWEEP_CAP} sweeps",
                off_diagonal_norm=off,
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # Rotation angle per Golub & Van Loan: pick the smaller
                # tangent root for stability.
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(tau * tau + 1.0))
                else:
                    t = -1.0 / (-tau + np.sqrt(tau * tau + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - sn * vec_q
                v[:, q] = sn * vec_p + c * vec_q
        sweeps += 1
        off = _off_diagonal_norm(a)

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return EigenResult(
        eigenvalues=values[order],
        eigenvectors=_fix_column_signs(v[:, order]),
    )


def cholesky(a) -> np.ndarray:
    """Lower-triangular L with L @ L.T = a, for symmetric positive-definite a.

    Only the lower triangle of `a` is read. A non-positive pivot raises
    SingularityError, which upstream treats as "regulator too small".
    """
    a = as_matrix(a, "a")
    n, m = a.shape
    if n != m:
        raise RejectedInput(f"cholesky needs a square matrix, got {n}x{m}")
    low = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot <= 0.0 or not np.isfinite(pivot):
            raise SingularityError(
                "matrix is not positive-definite", pivot=float(pivot), index=j
            )
        low[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


def spd_solve(a, b) -> np.ndarray:
    """Solve a @ x = b for symmetric positive-definite a via Cholesky.

    Factor-then-substitute, never an explicit inverse. `b` may be a vector
    or a matrix of right-hand-side columns; the result has matching shape.
    """
    a = as_matrix(a, "a")
    b_arr = np.asarray(b, dtype=np.float64)
    vector_input = b_arr.ndim == 1
    if vector_input:
        b_arr = b_arr[:, None]
    b_arr = as_matrix(b_arr, "b")
    if a.shape[0] != b_arr.shape[0]:
        raise RejectedInput(
            f"row mismatch: a is {a.shape[0]}x{a.shape[1]}, b has {b_arr.shape[0]} rows"
        )
    low = cholesky(a)
    n = a.shape[0]
    # Forward substitution: low @ y = b.
    y = np.empty_like(b_arr)
    for i in range(n):
        y[i] = (b_arr[i] - low[i, :i] @ y[:i]) / low[i, i]
    # Back substitution: low.T @ x = y.
    x = np.empty_like(b_arr)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - low[i + 1 :, i] @ x[i + 1 :]) / low[i, i]
    return x[:, 0] if vector_input else x
