"""pcadp: batch image privatization through PCA and the Laplace mechanism.

Reduce images to their leading principal components, add per-attribute
Laplace noise scaled by batch sensitivity, and map the noised coordinates
back to visible images through a regularized PCA inverse. Includes an
evaluation harness for the privacy-accuracy trade-off.
"""

__version__ = "0.1.0"

from .dpmech import (
    NoiseProfile,
    PrivacyParams,
    attribute_sensitivity,
    batch_stream,
    laplace_scales,
    privatize,
    sample_laplace,
    sample_laplace_block,
)
from .errors import (
    CodecError,
    ConvergenceError,
    DegenerateModelError,
    FormatError,
    HeterogeneityError,
    PcadpError,
    PipelineStageError,
    RejectedInput,
    SingularityError,
)
from .imageio import (
    Image,
    ImageDatabase,
    flatten,
    flatten_database,
    load_idx,
    load_image_dir,
    load_pgm,
    load_ppm,
    resize_nearest,
    save_pgm,
    save_ppm,
    unflatten,
)
from .matrixcore import EigenResult, mat_mul, spd_solve, sym_eigen
from .pca import PcaModel, ReducedBatch, fit, inverse, load_model, reduce, save_model
from .pipeline import (
    PrivatizedBatch,
    RunManifest,
    privatize_database,
    run_in_memory,
    split_batches,
)
from .evalharness import (
    LinearClassifier,
    SweepResult,
    distortion,
    evaluate,
    montage,
    sweep,
    train_classifier,
    write_sweep_csv,
    write_sweep_svg,
)

__all__ = [
    "__version__",
    "CodecError",
    "ConvergenceError",
    "DegenerateModelError",
    "EigenResult",
    "FormatError",
    "HeterogeneityError",
    "Image",
    "ImageDatabase",
    "LinearClassifier",
    "NoiseProfile",
    "PcadpError",
    "PcaModel",
    "PipelineStageError",
    "PrivacyParams",
    "PrivatizedBatch",
    "ReducedBatch",
    "RejectedInput",
    "RunManifest",
    "SingularityError",
    "SweepResult",
    "attribute_sensitivity",
    "batch_stream",
    "distortion",
    "evaluate",
    "fit",
    "flatten",
    "flatten_database",
    "inverse",
    "laplace_scales",
    "load_idx",
    "load_image_dir",
    "load_model",
    "load_pgm",
    "load_ppm",
    "mat_mul",
    "montage",
    "privatize",
    "privatize_database",
    "reduce",
    "resize_nearest",
    "run_in_memory",
    "sample_laplace",
    "sample_laplace_block",
    "save_model",
    "save_pgm",
    "save_ppm",
    "spd_solve",
    "split_batches",
    "sweep",
    "sym_eigen",
    "train_classifier",
    "unflatten",
    "write_sweep_csv",
    "write_sweep_svg",
]
