"""Exception types shared across the package.

Every error raised by pcadp derives from PcadpError so callers can catch
the whole family; the CLI maps subfamilies to exit codes (data/format
problems vs. numerical breakdowns).
"""


class PcadpError(Exception):
    """Base class for all pcadp errors."""


class RejectedInput(PcadpError, ValueError):
    """An argument violates an operation's preconditions."""


class FormatError(PcadpError):
    """Malformed file content.

    Carries the offending field name and the byte offset where the
    problem was detected, when known.
    """

    def __init__(self, message, *, path=None, field=None, offset=None):
        self.path = path
        self.field = field
        self.offset = offset
        detail = []
        if path is not None:
            detail.append(str(path))
        if field is not None:
            detail.append(f"field {field!r}")
        if offset is not None:
            detail.append(f"byte offset {offset}")
        if detail:
            message = f"{message} ({', '.join(detail)})"
        super().__init__(message)


class CodecError(FormatError):
    """A file could not be decoded by any supported codec."""


class HeterogeneityError(PcadpError):
    """Images in one database disagree on shape; lists the offenders."""

    def __init__(self, message, offenders=()):
        self.offenders = list(offenders)
        if self.offenders:
            message = f"{message}: {', '.join(map(str, self.offenders))}"
        super().__init__(message)


class ConvergenceError(PcadpError):
    """An iterative routine hit its iteration cap before its tolerance."""

    def __init__(self, message, off_diagonal_norm=None):
        self.off_diagonal_norm = off_diagonal_norm
        if off_diagonal_norm is not None:
            message = f"{message} (achieved off-diagonal norm {off_diagonal_norm:.3e})"
        super().__init__(message)


class SingularityError(PcadpError):
    """A factorization met a non-positive pivot (matrix not SPD)."""

    def __init__(self, message, pivot=None, index=None):
        self.pivot = pivot
        self.index = index
        if pivot is not None and index is not None:
            message = f"{message} (pivot {pivot:.3e} at row {index})"
        super().__init__(message)


class DegenerateModelError(PcadpError):
    """Fitting found no usable variance (e.g. all inputs identical)."""


class PipelineStageError(PcadpError):
    """A pipeline stage failed; records which batch and stage."""

    def __init__(self, batch_index, stage, cause):
        self.batch_index = batch_index
        self.stage = stage
        self.cause = cause
        super().__init__(f"batch {batch_index}, stage {stage!r}: {cause}")
