"""Privacy-accuracy evaluation: train a linear inspector on raw images,
score it on privatized ones over an (epsilon, d) grid, and emit the CSV,
SVG chart, and montage artifacts.

The inspector is multinomial logistic regression on [0,1]-scaled pixels,
trained by full-batch gradient descent with zero initialization, so its
weights are a deterministic function of the training set and settings.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .dpmech import PrivacyParams
from .errors import HeterogeneityError, PcadpError, RejectedInput
from .imageio import Image, ImageDatabase, flatten_database, save_image
from .pipeline import database_fingerprint, reconstructed_database, run_in_memory

TRAIN_EPOCHS = 300
TRAIN_LEARNING_RATE = 0.5

# PSNR of a zero-difference pair is reported as this sentinel.
PSNR_INFINITE = float("inf")


@dataclass(frozen=True)
class LinearClassifier:
    """Multinomial logistic regression weights, one row per class, bias last."""

    weights: np.ndarray  # (classes, s + 1)
    class_names: tuple[str, ...]
    epochs: int
    learning_rate: float
    seed: int
    final_loss: float
    train_accuracy: float


@dataclass(frozen=True)
class SweepCell:
    epsilon: float
    d: int
    accuracy_private: float
    accuracy_vanilla: float
    mse_mean: float
    psnr_mean: float
    status: str


@dataclass(frozen=True)
class SweepResult:
    """Accuracy/distortion grid over (epsilon, d), plus provenance ids."""

    cells: tuple[SweepCell, ...]
    dataset_id: str
    classifier_id: str
    seed: int


def _design_matrix(db: ImageDatabase) -> np.ndarray:
    x = flatten_database(db) / 255.0
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_classifier(
    train: ImageDatabase,
    epochs: int = TRAIN_EPOCHS,
    learning_rate: float = TRAIN_LEARNING_RATE,
    seed: int = 0,
) -> LinearClassifier:
    """Fit the linear inspector by full-batch gradient descent."""
    present = set(train.labels)
    if len(present) < 2:
        raise RejectedInput(f"training set has {len(present)} class(es), need >= 2")
    x = _design_matrix(train)
    n, cols = x.shape
    classes = len(train.class_names)
    y = np.zeros((n, classes))
    y[np.arange(n), list(train.labels)] = 1.0

    w = np.zeros((classes, cols))
    for _ in range(epochs):
        probs = _softmax(x @ w.T)
        w -= learning_rate * ((probs - y).T @ x) / n
    probs = _softmax(x @ w.T)
    loss = float(-np.mean(np.log(np.clip(probs[np.arange(n), list(train.labels)], 1e-300, None))))
    train_acc = float(np.mean(np.argmax(probs, axis=1) == np.asarray(train.labels)))
    return LinearClassifier(
        weights=w,
        class_names=train.class_names,
        epochs=epochs,
        learning_rate=learning_rate,
        seed=seed,
        final_loss=loss,
        train_accuracy=train_acc,
    )


def evaluate(clf: LinearClassifier, test: ImageDatabase) -> float:
    """Fraction of argmax-correct predictions (ties -> lowest class index)."""
    if test.n < 1:
        raise RejectedInput("test set is empty")
    s = test.width * test.height * test.channels
    if s + 1 != clf.weights.shape[1]:
        raise RejectedInput(
            f"image size {s} does not match classifier input {clf.weights.shape[1] - 1}"
        )
    x = _design_matrix(test)
    preds = np.argmax(x @ clf.weights.T, axis=1)
    correct = [
        clf.class_names[p] == test.class_names[t] for p, t in zip(preds, test.labels)
    ]
    return float(np.mean(correct))


def distortion(original: ImageDatabase, privatized: ImageDatabase):
    """Per-image MSE (intensity units squared) and PSNR in dB.

    PSNR = 10*log10(255^2 / MSE); a zero-MSE pair reports the infinity
    sentinel. Returns (mse array, psnr array), one entry per image.
    """
    if original.n != privatized.n:
        raise RejectedInput(f"image counts differ: {original.n} vs {privatized.n}")
    if (original.width, original.height, original.channels) != (
        privatized.width,
        privatized.height,
        privatized.channels,
    ):
        raise RejectedInput("image shapes differ between databases")
    mse = np.array(
        [
            float(np.mean((a.pixels.astype(np.float64) - b.pixels.astype(np.float64)) ** 2))
            for a, b in zip(original.images, privatized.images)
        ]
    )
    psnr = np.where(mse > 0.0, 10.0 * np.log10(255.0**2 / np.where(mse > 0.0, mse, 1.0)), PSNR_INFINITE)
    return mse, psnr


def montage(images, grid: tuple[int, int], path=None, separator: int = 255) -> Image:
    """Tile images row-major into one image with 1-px separators.

    The grid is (rows, cols); missing cells are filled black. Writes a PGM
    or PPM when a path is given.
    """
    images = list(images)
    rows, cols = grid
    if rows < 1 or cols < 1:
        raise RejectedInput(f"bad grid {rows}x{cols}")
    if not images:
        raise RejectedInput("no images to tile")
    if len(images) > rows * cols:
        raise RejectedInput(f"{len(images)} images exceed {rows}x{cols} grid")
    shape = images[0].shape
    offenders = [i for i, img in enumerate(images) if img.shape != shape]
    if offenders:
        raise HeterogeneityError("montage inputs disagree on shape", offenders)
    w, h, ch = shape
    canvas_w = cols * w + (cols - 1)
    canvas_h = rows * h + (rows - 1)
    canvas = np.full((ch, canvas_h, canvas_w), separator, dtype=np.uint8)
    for i, img in enumerate(images):
        r, c = divmod(i, cols)
        y0 = r * (h + 1)
        x0 = c * (w + 1)
        for plane in range(ch):
            canvas[plane, y0 : y0 + h, x0 : x0 + w] = img.plane(plane)
    # Unused trailing cells stay black rather than separator-colored.
    for i in range(len(images), rows * cols):
        r, c = divmod(i, cols)
        canvas[:, r * (h + 1) : r * (h + 1) + h, c * (w + 1) : c * (w + 1) + w] = 0
    out = Image(width=canvas_w, height=canvas_h, channels=ch, pixels=canvas.reshape(-1))
    if path is not None:
        save_image(out, path)
    return out


def derive_cell_seed(master_seed: int, epsilon: float, d: int) -> int:
    """Stable per-cell seed so grid cells are independent of each other."""
    text = f"{master_seed}|{float(epsilon)!r}|{int(d)}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def classifier_id(clf: LinearClassifier) -> str:
    h = hashlib.sha256(np.ascontiguousarray(clf.weights).tobytes()).hexdigest()[:16]
    return f"logreg-{clf.epochs}x{clf.learning_rate}-{h}"


def sweep(
    train: ImageDatabase,
    test: ImageDatabase,
    epsilons,
    ds,
    lambda_inv: float = 1e-6,
    seed: int = 0,
    batch_size: int = 100,
    classifier: LinearClassifier | None = None,
    log=None,
) -> SweepResult:
    """Privatize the test set per (epsilon, d) cell and score the inspector.

    The classifier is trained once on raw images and reused across the
    grid. Each cell privatizes through the pipeline with a seed derived
    from (seed, epsilon, d); a failing cell is recorded with its error and
    the sweep continues. PCA fits are shared across cells (they do not
    depend on epsilon, d, or the seed).
    """
    epsilons = list(epsilons)
    ds = list(ds)
    if not epsilons or not ds:
        raise RejectedInput("epsilons and ds must be non-empty")
    clf = classifier if classifier is not None else train_classifier(train)
    vanilla = evaluate(clf, test)
    fit_cache: dict = {}
    cells = []
    for eps in epsilons:
        for d in ds:
            cell_seed = derive_cell_seed(seed, eps, d)
            try:
                params = PrivacyParams(
                    epsilon=eps, d=d, lambda_inv=lambda_inv, seed=cell_seed, batch_size=batch_size
                )
                batches, _ = run_in_memory(test, params, fit_cache=fit_cache)
                priv_db = reconstructed_database(test, batches)
                acc = evaluate(clf, priv_db)
                mse, psnr = distortion(test, priv_db)
                cell = SweepCell(
                    epsilon=float(eps),
                    d=int(d),
                    accuracy_private=acc,
                    accuracy_vanilla=vanilla,
                    mse_mean=float(np.mean(mse)),
                    psnr_mean=float(np.mean(psnr)),
                    status="ok",
                )
            except PcadpError as exc:
                cell = SweepCell(
                    epsilon=float(eps),
                    d=int(d),
                    accuracy_private=float("nan"),
                    accuracy_vanilla=vanilla,
                    mse_mean=float("nan"),
                    psnr_mean=float("nan"),
                    status=f"failed: {type(exc).__name__}",
                )
            if log is not None:
                log(
                    f"cell epsilon={cell.epsilon} d={cell.d} "
                    f"accuracy={cell.accuracy_private:.4f} status={cell.status}"
                )
            cells.append(cell)
    return SweepResult(
        cells=tuple(cells),
        dataset_id=database_fingerprint(test),
        classifier_id=classifier_id(clf),
        seed=seed,
    )


CSV_HEADER = "epsilon,d,accuracy_private,accuracy_vanilla,mse_mean,psnr_mean,status"


def write_sweep_csv(result: SweepResult, path) -> None:
    """One row per grid cell, header exactly CSV_HEADER."""
    lines = [CSV_HEADER]
    for c in result.cells:
        lines.append(
            f"{c.epsilon!r},{c.d},{c.accuracy_private!r},{c.accuracy_vanilla!r},"
            f"{c.mse_mean!r},{c.psnr_mean!r},{c.status}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_sweep_svg(result: SweepResult, path, width: int = 720, height: int = 480) -> None:
    """Accuracy vs epsilon, one polyline per d, plus the vanilla reference line."""
    cells = [c for c in result.cells if c.status == "ok"]
    if not cells:
        raise RejectedInput("no successful cells to plot")
    eps_values = sorted({c.epsilon for c in cells})
    d_values = sorted({c.d for c in cells})
    margin = 50.0
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    e_lo, e_hi = min(eps_values), max(eps_values)
    e_span = (e_hi - e_lo) or 1.0

    def sx(e: float) -> float:
        return margin + (e - e_lo) / e_span * plot_w

    def sy(a: float) -> float:
        return margin + (1.0 - a) * plot_h

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="13">epsilon</text>',
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {height / 2:.1f})">accuracy</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        parts.append(
            f'<text x="{margin - 6:.1f}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{frac:.2f}</text>'
        )
    for e in eps_values:
        x = sx(e)
        parts.append(
            f'<text x="{x:.1f}" y="{height - margin + 16:.1f}" text-anchor="middle" font-size="11">{e:g}</text>'
        )
    ref = cells[0].accuracy_vanilla
    y_ref = sy(ref)
    parts.append(
        f'<line x1="{margin}" y1="{y_ref:.2f}" x2="{width - margin}" y2="{y_ref:.2f}" '
        f'stroke="black" stroke-dasharray="6 4"/>'
    )
    parts.append(
        f'<text x="{width - margin:.1f}" y="{y_ref - 5:.2f}" text-anchor="end" font-size="11">'
        f"reference {ref:.4f}</text>"
    )
    for i, d in enumerate(d_values):
        pts = sorted(
            ((c.epsilon, c.accuracy_private) for c in cells if c.d == d), key=lambda t: t[0]
        )
        coords = " ".join(f"{sx(e):.2f},{sy(a):.2f}" for e, a in pts)
        color = palette[i % len(palette)]
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width - margin + 4:.1f}" y="{sy(pts[-1][1]) + 4:.2f}" font-size="11" '
            f'fill="{color}">d={d}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def spearman(xs, ys) -> float:
    """Spearman rank correlation (average ranks on ties)."""
    def ranks(values):
        order = np.argsort(values, kind="stable")
        r = np.empty(len(values))
        sorted_vals = np.asarray(values)[order]
        i = 0
        while i < len(values):
            j = i
            while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
                j += 1
            r[order[i : j + 1]] = 0.5 * (i + j) + 1.0
            i = j + 1
        return r

    rx = ranks(list(xs))
    ry = ranks(list(ys))
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        raise RejectedInput("constant input to spearman")
    return float(rx @ ry) / denom
