"""End-to-end privatization: batch, fit, reduce, noise, invert, write.

A run is a pure function of (database bytes, params): batches are
contiguous index ranges, each batch gets its own PCA fit and its own
Philox stream keyed by (seed, batch index), and outputs land in out_dir
only after the whole run succeeds (staged directory swapped in atomically,
manifest written last). A failed run leaves out_dir exactly as it was.
"""

from __future__ import annotations

import hashlib
import os
import shutil
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dpmech import NoiseProfile, PrivacyParams, batch_stream, privatize
from .errors import PipelineStageError, RejectedInput
from .imageio import Image, ImageDatabase, flatten_database, save_image, unflatten
from .pca import PcaModel, ReducedBatch, fit, inverse, reduce

_STAGES = ("fit", "reduce", "privatize", "inverse", "quantize", "write")


@dataclass(frozen=True)
class BatchRecord:
    """Bookkeeping for one privatized batch, embedded in the manifest."""

    index: int
    start: int
    stop: int
    rank: int
    profile: NoiseProfile
    reconstruction_mse: float


@dataclass(frozen=True)
class PrivatizedBatch:
    """One batch's noised coordinates and their visible reconstructions."""

    index: int
    reduced_noised: ReducedBatch
    reconstructed: tuple[Image, ...]
    profile: NoiseProfile


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility envelope for a privatization run."""

    params: PrivacyParams
    fingerprint: str
    n: int
    width: int
    height: int
    channels: int
    batches: tuple[BatchRecord, ...]
    tool_version: str = __version__
    created_utc: str = ""


def split_batches(db, batch_size: int) -> list[range]:
    """Contiguous batch ranges covering the database in order.

    A final short batch survives if it holds at least 2 images; a tail of
    1 is merged into the previous batch (sensitivity needs pairs).
    """
    n = db.n if isinstance(db, ImageDatabase) else int(db)
    if batch_size < 2:
        raise RejectedInput(f"batch_size must be >= 2, got {batch_size}")
    if n < 2:
        raise RejectedInput(f"need at least 2 images, got {n}")
    starts = list(range(0, n, batch_size))
    ranges = [range(a, min(a + batch_size, n)) for a in starts]
    if len(ranges) > 1 and len(ranges[-1]) < 2:
        tail = ranges.pop()
        last = ranges.pop()
        ranges.append(range(last.start, tail.stop))
    return ranges


def database_fingerprint(db: ImageDatabase) -> str:
    """Content hash over shape, labels, and pixel bytes."""
    h = hashlib.sha256()
    h.update(f"{db.n},{db.width},{db.height},{db.channels}".encode())
    h.update(",".join(map(str, db.labels)).encode())
    for img in db.images:
        h.update(img.pixels.tobytes())
    return f"sha256:{h.hexdigest()}"


def run_batches(db: ImageDatabase, params: PrivacyParams, fit_cache: dict | None = None, log=None):
    """Yield (PrivatizedBatch, BatchRecord) per batch, in dataset order.

    fit_cache maps (start, stop) to a PcaModel; since a fit depends only
    on the batch's pixels, callers sweeping many (epsilon, d) settings over
    one database may share a cache without changing any output.
    """
    ranges = split_batches(db, params.batch_size)
    for bidx, rng in enumerate(ranges):
        stage = "fit"
        try:
            rows = flatten_database(db, rng)
            key = (rng.start, rng.stop)
            model: PcaModel | None = None if fit_cache is None else fit_cache.get(key)
            if model is None:
                model = fit(rows)
                if fit_cache is not None:
                    fit_cache[key] = model
            stage = "reduce"
            reduced = reduce(model, rows, params.d)
            stage = "privatize"
            noised, profile = privatize(reduced, params, batch_stream(params.seed, bidx))
            stage = "inverse"
            recon_rows = inverse(model, noised, params.lambda_inv)
            stage = "quantize"
            images = tuple(
                unflatten(row, db.width, db.height, db.channels) for row in recon_rows
            )
            mse = float(
                np.mean(
                    [
                        np.mean(
                            (img.pixels.astype(np.float64) - db.images[i].pixels.astype(np.float64))
                            ** 2
                        )
                        for i, img in zip(rng, images)
                    ]
                )
            )
        except Exception as exc:
            raise PipelineStageError(bidx, stage, exc) from exc
        record = BatchRecord(
            index=bidx,
            start=rng.start,
            stop=rng.stop,
            rank=model.rank,
            profile=profile,
            reconstruction_mse=mse,
        )
        if log is not None:
            log(f"batch {bidx}: images [{rng.start},{rng.stop}) rank {record.rank} mse {mse:.2f}")
        yield PrivatizedBatch(bidx, noised, images, profile), record


def run_in_memory(db: ImageDatabase, params: PrivacyParams, fit_cache: dict | None = None, log=None):
    """Run the whole pipeline without touching disk; returns (batches, manifest)."""
    batches = []
    records = []
    for batch, record in run_batches(db, params, fit_cache, log):
        batches.append(batch)
        records.append(record)
    manifest = RunManifest(
        params=params,
        fingerprint=database_fingerprint(db),
        n=db.n,
        width=db.width,
        height=db.height,
        channels=db.channels,
        batches=tuple(records),
        created_utc=_utc_now(),
    )
    return batches, manifest


def reconstructed_database(db: ImageDatabase, batches) -> ImageDatabase:
    """Reassemble privatized batches into a database with the source labels."""
    images = [img for batch in batches for img in batch.reconstructed]
    return ImageDatabase(images=tuple(images), labels=db.labels, class_names=db.class_names)


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _safe_label(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


def output_image_name(index: int, label: str, channels: int) -> str:
    ext = "pgm" if channels == 1 else "ppm"
    return f"{index:06d}_{_safe_label(label)}.{ext}"


def privatize_database(
    db: ImageDatabase,
    params: PrivacyParams,
    out_dir,
    fit_cache: dict | None = None,
    log=None,
) -> RunManifest:
    """Privatize a database and write images plus a manifest to out_dir.

    Image files are named by zero-padded original index and label so the
    evaluation side can re-join labels without a side channel. Everything
    is staged in a scratch directory and swapped into place only on
    success; the manifest is written last.
    """
    out_dir = Path(out_dir)
    staging = out_dir.parent / f".{out_dir.name}.staging-{os.getpid()}"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        records = []
        for batch, record in run_batches(db, params, fit_cache, log):
            try:
                for i, img in zip(range(record.start, record.stop), batch.reconstructed):
                    name = output_image_name(i, db.class_names[db.labels[i]], db.channels)
                    save_image(img, staging / name)
            except Exception as exc:
                raise PipelineStageError(record.index, "write", exc) from exc
            records.append(record)
        manifest = RunManifest(
            params=params,
            fingerprint=database_fingerprint(db),
            n=db.n,
            width=db.width,
            height=db.height,
            channels=db.channels,
            batches=tuple(records),
            created_utc=_utc_now(),
        )
        tmp_manifest = staging / "manifest.txt.tmp"
        tmp_manifest.write_text(format_manifest(manifest))
        os.replace(tmp_manifest, staging / "manifest.txt")
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    # Swap the finished staging directory into place.
    old = out_dir.parent / f".{out_dir.name}.old-{os.getpid()}"
    if out_dir.exists():
        os.replace(out_dir, old)
    os.replace(staging, out_dir)
    if old.exists():
        shutil.rmtree(old)
    return manifest


def _fmt(x: float) -> str:
    return repr(float(x))


def format_manifest(manifest: RunManifest) -> str:
    """Render the line-oriented manifest (stable section and field order)."""
    p = manifest.params
    lines = [
        "[run]",
        f"tool = pcadp {manifest.tool_version}",
        f"created_utc = {manifest.created_utc}",
        f"epsilon = {_fmt(p.epsilon)}",
        f"d = {p.d}",
        f"lambda_inv = {_fmt(p.lambda_inv)}",
        f"seed = {p.seed}",
        f"batch_size = {p.batch_size}",
        "[dataset]",
        f"fingerprint = {manifest.fingerprint}",
        f"n = {manifest.n}",
        f"width = {manifest.width}",
        f"height = {manifest.height}",
        f"channels = {manifest.channels}",
    ]
    for rec in manifest.batches:
        lines.append(f"[batch {rec.index}]")
        lines.append(f"start = {rec.start}")
        lines.append(f"stop = {rec.stop}")
        lines.append(f"rank = {rec.rank}")
        lines.append(f"reconstruction_mse = {_fmt(rec.reconstruction_mse)}")
        lines.append("noise_profile = attribute sensitivity scale")
        for l, (sens, scale) in enumerate(zip(rec.profile.sensitivities, rec.profile.scales)):
            lines.append(f"  {l} {_fmt(sens)} {_fmt(scale)}")
    return "\n".join(lines) + "\n"


def read_manifest_summary(path) -> dict:
    """Parse a manifest back into a summary dict (for `pcadp inspect`)."""
    sections: dict[str, dict] = {}
    current = None
    batch_count = 0
    for line in Path(path).read_text().splitlines():
        if line.startswith("["):
            name = line.strip("[]")
            if name.startswith("batch"):
                batch_count += 1
                current = None
                continue
            current = sections.setdefault(name, {})
        elif current is not None and " = " in line and not line.startswith(" "):
            key, _, value = line.partition(" = ")
            current[key] = value
    summary = dict(sections.get("run", {}))
    summary.update(sections.get("dataset", {}))
    summary["batches"] = str(batch_count)
    return summary
