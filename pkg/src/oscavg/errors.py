"""Exception types shared across the pipeline.

Exit-code mapping used by the CLI: UsageError -> 1, PipelineError -> 2,
verification rejection -> 3.
"""


class UsageError(Exception):
    """Bad command-line arguments or malformed input files."""


class SchemaError(UsageError):
    """Input file violates the system-file schema.

    ``path`` points at the offending field, e.g. "grades[0].terms[1].frequency".
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class PipelineError(Exception):
    """A mathematical precondition of the pipeline failed."""


class ConstraintError(PipelineError):
    """The grade count k and exponent alpha violate k*alpha <= 1 < (k+1)*alpha."""


class ResonanceError(PipelineError):
    """A frequency-shift solve hit a singular system (resonant eigenvalue pair)."""


class RepeatedEigenvaluesError(PipelineError):
    """Leading averaged matrix has (numerically) repeated eigenvalues."""


class CurveTrackingError(PipelineError):
    """Eigenvalue-curve continuity matching stayed ambiguous after refinement."""


class InsufficientSpanError(PipelineError):
    """Not enough samples / time span to fit a growth model."""
