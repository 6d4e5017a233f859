"""Command-line entry point: privatize, sweep, montage, inspect.

Settings merge as defaults < config file < flags. Exit codes: 0 success,
1 usage/config error, 2 data or format error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dpmech import PrivacyParams
from .errors import (
    ConvergenceError,
    DegenerateModelError,
    FormatError,
    HeterogeneityError,
    PcadpError,
    PipelineStageError,
    RejectedInput,
    SingularityError,
)
from .evalharness import derive_cell_seed, montage, sweep, write_sweep_csv, write_sweep_svg
from .imageio import load_idx, load_image_dir
from .pipeline import (
    privatize_database,
    read_manifest_summary,
    reconstructed_database,
    run_in_memory,
)

DEFAULTS = {"lambda_inv": 1e-6, "seed": 0, "batch_size": 100}

CONFIG_KEYS = {
    "epsilon",
    "d",
    "lambda_inv",
    "seed",
    "batch_size",
    "idx_images",
    "idx_labels",
    "image_dir",
    "manifest",
    "out",
    "epsilons",
    "ds",
    "montage_rows",
    "montage_cols",
}

# Sweep splits its single input database into train/test deterministically.
SWEEP_TRAIN_DEFAULT = 2000
SWEEP_TEST_DEFAULT = 1000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1, not argparse's 2
        raise UsageError(message)


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad integer list {text!r}") from exc


def build_parser() -> _Parser:
    parser = _Parser(prog="pcadp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file; flags override it")
    common.add_argument("--epsilon", type=float, help="privacy budget (> 0)")
    common.add_argument("--d", type=int, help="retained PCA dimension (>= 1)")
    common.add_argument(
        "--lambda-inv", dest="lambda_inv", type=float,
        help="regulator magnitude for the PCA inverse (default: 1e-06)",
    )
    common.add_argument("--seed", type=int, help="RNG seed (default: 0)")
    common.add_argument(
        "--batch-size", dest="batch_size", type=int,
        help="images per privatization batch (default: 100)",
    )
    common.add_argument("--idx-images", dest="idx_images", help="IDX image file")
    common.add_argument("--idx-labels", dest="idx_labels", help="IDX label file")
    common.add_argument("--image-dir", dest="image_dir", help="directory of PGM/PPM images")
    common.add_argument(
        "--manifest",
        help="'filename,label' manifest for --image-dir; run manifest for inspect",
    )
    common.add_argument("--out", help="output directory (or file for montage)")
    common.add_argument("--epsilons", help="comma list of epsilon values")
    common.add_argument("--ds", help="comma list of d values")
    common.add_argument("--montage-rows", dest="montage_rows", type=int, help="montage grid rows")
    common.add_argument("--montage-cols", dest="montage_cols", type=int, help="montage grid cols")

    sub.add_parser("privatize", parents=[common], help="privatize a database to visible images")
    sub.add_parser("sweep", parents=[common], help="accuracy/distortion grid over epsilon x d")
    sub.add_parser("montage", parents=[common], help="tile images (or an epsilon x d grid) into one file")
    sub.add_parser("inspect", parents=[common], help="summarize a run manifest")
    return parser


def _load_config(path) -> dict:
    settings = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        settings[key] = value
    return settings


_CONFIG_PARSERS = {
    "epsilon": float,
    "d": int,
    "lambda_inv": float,
    "seed": int,
    "batch_size": int,
    "montage_rows": int,
    "montage_cols": int,
}


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge spec defaults, config file values, and flags (flags win)."""
    settings = dict(DEFAULTS)
    if args.config:
        for key, raw in _load_config(args.config).items():
            parse = _CONFIG_PARSERS.get(key, str)
            try:
                settings[key] = parse(raw)
            except ValueError as exc:
                raise UsageError(f"config key {key}: bad value {raw!r}") from exc
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _require(settings: dict, *keys: str) -> None:
    missing = [k for k in keys if settings.get(k) is None]
    if missing:
        raise UsageError(f"missing required setting(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")


def _load_database(settings: dict):
    if settings.get("idx_images") or settings.get("idx_labels"):
        _require(settings, "idx_images", "idx_labels")
        return load_idx(settings["idx_images"], settings["idx_labels"])
    if settings.get("image_dir"):
        _require(settings, "image_dir", "manifest")
        return load_image_dir(settings["image_dir"], settings["manifest"])
    raise UsageError("no input dataset: give --idx-images/--idx-labels or --image-dir/--manifest")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _params_from_settings(settings: dict, epsilon, d) -> PrivacyParams:
    """Build PrivacyParams, reporting bad values as usage errors."""
    try:
        return PrivacyParams(
            epsilon=epsilon,
            d=d,
            lambda_inv=settings["lambda_inv"],
            seed=settings["seed"],
            batch_size=settings["batch_size"],
        )
    except RejectedInput as exc:
        raise UsageError(str(exc)) from exc


def _cmd_privatize(settings: dict) -> int:
    _require(settings, "epsilon", "d", "out")
    params = _params_from_settings(settings, settings["epsilon"], settings["d"])
    db = _load_database(settings)
    manifest = privatize_database(db, params, settings["out"], log=_log)
    print(f"wrote {manifest.n} images and manifest.txt to {settings['out']}")
    return 0


def _split_for_sweep(db):
    if db.n >= SWEEP_TRAIN_DEFAULT + SWEEP_TEST_DEFAULT:
        n_train, n_test = SWEEP_TRAIN_DEFAULT, SWEEP_TEST_DEFAULT
    else:
        n_train = max(2, (2 * db.n) // 3)
        n_test = db.n - n_train
    if n_test < 2:
        raise RejectedInput(f"database too small to split for sweep: n={db.n}")
    return db.subset(range(n_train)), db.subset(range(n_train, n_train + n_test))


def _cmd_sweep(settings: dict) -> int:
    _require(settings, "epsilons", "ds", "out")
    epsilons = _parse_float_list(settings["epsilons"])
    ds = _parse_int_list(settings["ds"])
    if not epsilons or not ds:
        raise UsageError("empty --epsilons or --ds list")
    _params_from_settings(settings, epsilons[0], ds[0])  # validate fixed values up front
    db = _load_database(settings)
    train, test = _split_for_sweep(db)
    _log(f"sweep: {train.n} train / {test.n} test images, grid {len(epsilons)}x{len(ds)}")
    result = sweep(
        train,
        test,
        epsilons,
        ds,
        lambda_inv=settings["lambda_inv"],
        seed=settings["seed"],
        batch_size=settings["batch_size"],
        log=_log,
    )
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result, out / "sweep.csv")
    write_sweep_svg(result, out / "sweep.svg")
    print(f"wrote sweep.csv and sweep.svg to {out}")
    return 0


def _cmd_montage(settings: dict) -> int:
    _require(settings, "out")
    db = _load_database(settings)
    if settings.get("epsilons") and settings.get("ds"):
        epsilons = _parse_float_list(settings["epsilons"])
        ds = _parse_int_list(settings["ds"])
        head = db.subset(range(min(settings["batch_size"], db.n)))
        tiles = []
        for d in ds:
            for eps in epsilons:
                base = _params_from_settings(settings, eps, d)
                params = PrivacyParams(
                    epsilon=eps,
                    d=d,
                    lambda_inv=base.lambda_inv,
                    seed=derive_cell_seed(base.seed, eps, d),
                    batch_size=head.n,
                )
                batches, _ = run_in_memory(head, params)
                tiles.append(reconstructed_database(head, batches).images[0])
        grid = (len(ds), len(epsilons))
    else:
        _require(settings, "montage_rows", "montage_cols")
        rows, cols = settings["montage_rows"], settings["montage_cols"]
        tiles = list(db.images[: rows * cols])
        grid = (rows, cols)
    montage(tiles, grid, settings["out"])
    print(f"wrote montage {grid[0]}x{grid[1]} to {settings['out']}")
    return 0


def _cmd_inspect(settings: dict) -> int:
    _require(settings, "manifest")
    for key, value in read_manifest_summary(settings["manifest"]).items():
        print(f"{key} = {value}")
    return 0


_COMMANDS = {
    "privatize": _cmd_privatize,
    "sweep": _cmd_sweep,
    "montage": _cmd_montage,
    "inspect": _cmd_inspect,
}


def _exit_code(exc: PcadpError) -> int:
    if isinstance(exc, PipelineStageError) and isinstance(exc.cause, PcadpError):
        return _exit_code(exc.cause)
    if isinstance(exc, (ConvergenceError, SingularityError, DegenerateModelError)):
        return 3
    return 2


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required (privatize, sweep, montage, inspect)")
        settings = resolve_settings(args)
        try:
            return _COMMANDS[args.command](settings)
        except PcadpError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return _exit_code(exc)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
