"""Domain error hierarchy.

Every error the pipeline can raise on bad input derives from GraphofuseError,
so the CLI can map any domain failure to exit code 1 while printing the
concrete error name.
"""


class GraphofuseError(Exception):
    """Base class for all domain errors."""


# --- ingest ---------------------------------------------------------------

class MalformedRow(GraphofuseError):
    """A pen-stream row has the wrong column count, a non-integer token,
    a negative device value, or a timestamp going backwards."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CountMismatch(GraphofuseError):
    """Declared row count in the header disagrees with the body."""


class EmptyStream(GraphofuseError):
    """Pen-stream input contains no sample rows."""


class MissingFile(GraphofuseError):
    """A metadata row references a pen-stream file that does not exist."""


class InvalidLabel(GraphofuseError):
    """Metadata label token outside {TD, DYG}."""


class DuplicateSampleId(GraphofuseError):
    """Two records resolve to the same sample id."""


class RecordRejected(GraphofuseError):
    """A record fails validation (e.g. no on-surface samples)."""


# --- raster ---------------------------------------------------------------

class NoInk(GraphofuseError):
    """Rasterization requested for a record without on-surface samples."""


class IoError(GraphofuseError):
    """File read/write failed."""


# --- offline features -----------------------------------------------------

class MalformedHeader(GraphofuseError):
    """Embedding file does not start with a valid ``dim=<D>`` line."""


class DimMismatch(GraphofuseError):
    """Embedding row length differs from the declared dimension."""


class NonFiniteValue(GraphofuseError):
    """Embedding row contains NaN or infinity."""


class MissingSample(GraphofuseError):
    """A record has no image/embedding/feature row where one is required."""


# --- models ---------------------------------------------------------------

class SingleClassInput(GraphofuseError):
    """Training data contains only one class."""


class NonFiniteInput(GraphofuseError):
    """Training data contains NaN or infinity."""


class DimensionMismatch(GraphofuseError):
    """Input vector dimension differs from the model's feature dimension."""


class SchemaVersionMismatch(GraphofuseError):
    """Model file is missing, truncated, or carries an unknown schema."""


# --- fusion ---------------------------------------------------------------

class EmptyInput(GraphofuseError):
    """An operation requiring a nonempty collection received an empty one."""


class SampleIdMismatch(GraphofuseError):
    """Two modality vectors for supposedly the same sample carry different ids."""


# --- eval -----------------------------------------------------------------

class TooFewSubjects(GraphofuseError):
    """Fewer subjects than requested folds."""


class CoverageMismatch(GraphofuseError):
    """Online and offline feature sets do not cover the same sample ids."""


class EmptyConfusion(GraphofuseError):
    """Metrics requested for an all-zero confusion matrix."""


# --- synth ----------------------------------------------------------------

class InvalidConfig(GraphofuseError):
    """Synthetic-corpus configuration violates its declared ranges."""
