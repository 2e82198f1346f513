"""Exception hierarchy shared across the pipeline."""


class NarratorError(Exception):
    """Base class for all errors raised by this package."""


class SceneParseError(NarratorError):
    """A detection-stream record could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SceneStructureError(NarratorError):
    """The stream parsed but violates a structural invariant (e.g. frame order)."""


class TrackingError(NarratorError):
    """Tracking preconditions violated (empty spans, bad parameters)."""


class PostureError(NarratorError):
    """Pose vector or codebook preconditions violated."""


class FeatureError(NarratorError):
    """Feature extraction preconditions violated (short track, empty overlap)."""


class SchemaMismatchError(NarratorError):
    """A feature series does not match the model's output schema."""


class ModelError(NarratorError):
    """Model training/evaluation preconditions violated."""


class GenerationError(NarratorError):
    """Sentence generation preconditions violated (missing role, unknown class)."""


class SynthError(NarratorError):
    """A synthetic event script is invalid or geometrically infeasible."""
