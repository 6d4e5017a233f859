"""Laplace mechanism over reduced batches: sensitivities, scales, noise.

Sensitivity is computed per attribute on the actual reduced batch (the
range its values span), the Laplace scale is sensitivity / epsilon, and
one noise draw is added per record per attribute.

Randomness comes from Philox (a fixed, named 64-bit counter-based
generator) with one independent stream per batch, keyed by (seed, batch
index). Every Laplace sample consumes exactly one 64-bit word, whether
drawn singly or as a block, so outputs are reproducible bit-for-bit
across runs, platforms, and batch-level parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RejectedInput
from .pca import ReducedBatch

_MASK64 = (1 << 64) - 1
_U64_MAX = np.uint64(_MASK64)


@dataclass(frozen=True)
class PrivacyParams:
    """Knobs of one privatization run."""

    epsilon: float
    d: int
    lambda_inv: float = 1e-6
    seed: int = 0
    batch_size: int = 100

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise RejectedInput(f"epsilon must be positive, got {self.epsilon}")
        if self.d < 1:
            raise RejectedInput(f"d must be >= 1, got {self.d}")
        if not self.lambda_inv > 0.0:
            raise RejectedInput(f"lambda_inv must be positive, got {self.lambda_inv}")
        if self.batch_size < 2:
            raise RejectedInput(f"batch_size must be >= 2, got {self.batch_size}")


@dataclass(frozen=True)
class NoiseProfile:
    """Per-attribute sensitivities and the Laplace scales derived from them."""

    sensitivities: np.ndarray
    scales: np.ndarray


def attribute_sensitivity(reduced: ReducedBatch) -> np.ndarray:
    """Range (max - min) of each attribute over the batch.

    Pairwise |value_i - value_j| over i != j attains its maximum at the
    attribute's extremes, so the range equals the pairwise definition for
    any batch of at least two records.
    """
    rows = reduced.rows
    if rows.shape[0] < 2:
        raise RejectedInput(f"sensitivity needs >= 2 records, got {rows.shape[0]}")
    return rows.max(axis=0) - rows.min(axis=0)


def laplace_scales(sensitivities, epsilon: float) -> np.ndarray:
    """Per-attribute noise scale: sensitivity / epsilon (zero stays zero)."""
    if not epsilon > 0.0:
        raise RejectedInput(f"epsilon must be positive, got {epsilon}")
    return np.asarray(sensitivities, dtype=np.float64) / epsilon


def batch_stream(seed: int, batch_index: int) -> np.random.Generator:
    """Independent Philox stream for one batch, keyed by (seed, batch index)."""
    key = np.array([seed & _MASK64, batch_index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _uniform_open(words: np.ndarray) -> np.ndarray:
    """Map raw 64-bit words to uniforms strictly inside (-0.5, 0.5).

    Uses the top 53 bits centered on half-steps, so neither endpoint nor
    zero is representable and the log in the inverse CDF stays finite.
    """
    return ((words >> np.uint64(11)) + 0.5) * 2.0**-53 - 0.5


def _laplace_from_words(words: np.ndarray, scale) -> np.ndarray:
    u = _uniform_open(words)
    return -np.asarray(scale) * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_laplace_block(scale, shape, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Laplace draws of the given shape by inverse CDF.

    `scale` may be a scalar or an array broadcastable to `shape` (e.g. one
    scale per column). Consumes exactly one 64-bit word per output element,
    in C order, identical to repeated single draws; entries with scale 0
    come back exactly 0.0.
    """
    scale_arr = np.asarray(scale, dtype=np.float64)
    if np.any(scale_arr < 0.0):
        raise RejectedInput("scales must be non-negative")
    words = rng.integers(0, _U64_MAX, size=shape, dtype=np.uint64, endpoint=True)
    out = _laplace_from_words(words, scale_arr)
    zero = np.broadcast_to(scale_arr == 0.0, out.shape)
    out[zero] = 0.0
    return out


def sample_laplace(scale: float, rng: np.random.Generator) -> float:
    """One zero-mean Laplace(scale) draw by inverse CDF.

    Always consumes exactly one 64-bit word from the stream; scale 0
    returns exactly 0.0 (a point mass) while keeping the stream aligned.
    """
    if scale < 0.0:
        raise RejectedInput(f"scale must be non-negative, got {scale}")
    word = rng.integers(0, _U64_MAX, dtype=np.uint64, endpoint=True)
    if scale == 0.0:
        return 0.0
    return float(_laplace_from_words(np.asarray(word), scale))


def privatize(
    reduced: ReducedBatch, params: PrivacyParams, rng: np.random.Generator
) -> tuple[ReducedBatch, NoiseProfile]:
    """Add per-attribute Laplace noise to every record of a reduced batch.

    Draw order is record-major, attribute-minor (one fresh draw per cell),
    so the output is a pure function of (batch, params, stream). Returns
    the noised batch and the NoiseProfile actually used.
    """
    if reduced.d != params.d:
        raise RejectedInput(f"reduced batch has d={reduced.d}, params say d={params.d}")
    sens = attribute_sensitivity(reduced)
    scales = laplace_scales(sens, params.epsilon)
    noise = sample_laplace_block(scales[None, :], reduced.rows.shape, rng)
    return (
        ReducedBatch(rows=reduced.rows + noise),
        NoiseProfile(sensitivities=sens, scales=scales),
    )
