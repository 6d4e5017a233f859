"""Batch PCA: fit, reduce to d attributes, and regularized inverse.

Conventions: a batch is an n x s matrix whose rows are flattened images.
The covariance here is the unnormalized scatter of the mean-centered
batch, so eigenvalues sum to the batch's total squared deviation. When
n < s the fit goes through the n x n Gram matrix instead of the s x s
scatter; both paths produce the same model.

The inverse maps reduced rows back to pixel space through the regularized
system (B_d B_d^T + lambda_inv * I), solved by factorization for small s
and by the projector decomposition of that matrix for large s, never by
an explicit inverse.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateModelError, FormatError, RejectedInput
from .matrixcore import spd_solve, sym_eigen

# Eigenvalues at or below RANK_DROP_REL_TOL * (largest eigenvalue) are
# treated as numerical zeros and dropped from the model.
RANK_DROP_REL_TOL = 1e-9

# Above this attribute count the regularized inverse switches from a dense
# Cholesky solve to the projector decomposition (O(s*d) per row).
DIRECT_SOLVE_MAX_DIM = 128

MODEL_MAGIC = b"PCADP1"


@dataclass(frozen=True)
class PcaModel:
    """Per-attribute mean, descending eigenvalues, orthonormal basis columns."""

    mean: np.ndarray  # (s,)
    eigenvalues: np.ndarray  # (r,), non-increasing, >= 0
    basis: np.ndarray  # (s, r), column i pairs with eigenvalues[i]

    @property
    def s(self) -> int:
        return self.mean.shape[0]

    @property
    def rank(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class ReducedBatch:
    """n reduced records of d attributes each."""

    rows: np.ndarray  # (n, d)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


def _validate_batch(batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise RejectedInput(f"batch must be 2-D (n x s), got {x.ndim}-D")
    if x.shape[0] < 2:
        raise RejectedInput(f"need at least 2 rows to fit, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise RejectedInput("batch contains NaN or Inf")
    return x


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(basis), axis=0)
    flip = basis[idx, np.arange(basis.shape[1])] < 0.0
    basis = basis.copy()
    basis[:, flip] *= -1.0
    return basis


def fit(batch, method: str = "auto") -> PcaModel:
    """Fit a PCA model to an n x s batch of flattened images.

    method: "direct" eigendecomposes the s x s scatter; "gram" goes through
    the n x n Gram matrix and maps eigenvectors back (mandatory speed path
    for wide batches); "auto" picks gram when n < s. Retains rank
    r <= min(n - 1, s), dropping eigenvalues <= RANK_DROP_REL_TOL * largest.
    """
    x = _validate_batch(batch)
    n, s = x.shape
    if method not in ("auto", "direct", "gram"):
        raise RejectedInput(f"unknown fit method {method!r}")
    if method == "auto":
        method = "gram" if n < s else "direct"

    mean = x.mean(axis=0)
    centered = x - mean

    if method == "direct":
        scatter = centered.T @ centered
        eig = sym_eigen(scatter)
        values = np.maximum(eig.eigenvalues, 0.0)
        if values[0] <= 0.0:
            raise DegenerateModelError("zero covariance: all images in the batch are identical")
        keep = values > RANK_DROP_REL_TOL * values[0]
        keep[min(n - 1, s) :] = False
        basis = eig.eigenvectors[:, keep]
    else:
        gram = centered @ centered.T
        eig = sym_eigen(gram)
        values = np.maximum(eig.eigenvalues, 0.0)
        if values[0] <= 0.0:
            raise DegenerateModelError("zero covariance: all images in the batch are identical")
        keep = values > RANK_DROP_REL_TOL * values[0]
        keep[n - 1 :] = False
        kept_vals = values[keep]
        # Map Gram eigenvectors v to scatter eigenvectors e = X_c^T v / sqrt(lambda).
        basis = (centered.T @ eig.eigenvectors[:, keep]) / np.sqrt(kept_vals)
        basis = _fix_signs(basis)

    return PcaModel(mean=mean, eigenvalues=values[keep].copy(), basis=basis)


def reduce(model: PcaModel, batch, d: int) -> ReducedBatch:
    """Project raw rows onto the leading d basis columns (centering included)."""
    if not 1 <= d <= model.rank:
        raise RejectedInput(f"d={d} outside 1..{model.rank} (model rank)")
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.s:
        raise RejectedInput(f"batch must be n x {model.s}, got shape {x.shape}")
    return ReducedBatch(rows=(x - model.mean) @ model.basis[:, :d])


def inverse(model: PcaModel, reduced: ReducedBatch, lambda_inv: float, method: str = "auto") -> np.ndarray:
    """Map reduced rows back to pixel space through the regularized system.

    Each centered row solves (B_d B_d^T + lambda_inv * I) x = B_d r, then
    the model mean is added back. method "direct" assembles the s x s
    system and factor-solves it; "projector" evaluates the same inverse
    through the decomposition
        (P + lambda*I)^-1 = P/(1+lambda) + (I - P)/lambda,  P = B_d B_d^T,
    computing P y honestly through the basis. "auto" picks direct for
    s <= DIRECT_SOLVE_MAX_DIM. Both routes agree to tight tolerance.
    """
    if not lambda_inv > 0.0:
        raise RejectedInput(f"lambda_inv must be positive, got {lambda_inv}")
    if method not in ("auto", "direct", "projector"):
        raise RejectedInput(f"unknown inverse method {method!r}")
    if reduced.d > model.rank:
        raise RejectedInput(f"reduced d={reduced.d} exceeds model rank {model.rank}")
    basis_d = model.basis[:, : reduced.d]
    s = model.s
    if method == "auto":
        method = "direct" if s <= DIRECT_SOLVE_MAX_DIM else "projector"

    back = reduced.rows @ basis_d.T  # rows are B_d r, one per record
    if method == "direct":
        system = basis_d @ basis_d.T + lambda_inv * np.eye(s)
        centered = spd_solve(system, back.T).T
    else:
        projected = (back @ basis_d) @ basis_d.T
        centered = projected / (1.0 + lambda_inv) + (back - projected) / lambda_inv
    return centered + model.mean


def save_model(model: PcaModel, path) -> None:
    """Serialize to the flat binary container (magic PCADP1, little-endian)."""
    header = MODEL_MAGIC + struct.pack("<II", model.s, model.rank)
    body = b"".join(
        arr.astype("<f8").tobytes()
        for arr in (model.mean, model.eigenvalues, np.ascontiguousarray(model.basis))
    )
    Path(path).write_bytes(header + body)


def load_model(path) -> PcaModel:
    """Read a model written by save_model, validating magic and size."""
    data = Path(path).read_bytes()
    if data[:6] != MODEL_MAGIC:
        raise FormatError(
            f"bad model magic {data[:6]!r}", path=path, field="magic", offset=0
        )
    if len(data) < 14:
        raise FormatError("file ends inside header", path=path, field="header", offset=len(data))
    s, r = struct.unpack_from("<II", data, 6)
    expected = 14 + 8 * (s + r + s * r)
    if len(data) != expected:
        raise FormatError(
            f"payload is {len(data) - 14} bytes, expected {expected - 14}",
            path=path,
            field="payload",
            offset=min(len(data), expected),
        )
    floats = np.frombuffer(data, dtype="<f8", offset=14).astype(np.float64)
    mean = floats[:s]
    eigenvalues = floats[s : s + r]
    basis = floats[s + r :].reshape(s, r)
    return PcaModel(mean=mean, eigenvalues=eigenvalues, basis=basis)
