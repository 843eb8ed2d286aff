class ExporterError(Exception):
    """Base class for exporter failures."""


class MissingWeights(ExporterError):
    """Pretrained weights are unavailable (no file, no download)."""


class DuplicateSampleId(ExporterError):
    """Two image files resolve to the same sample id."""


class UnreadableImage(ExporterError):
    """An image could not be decoded (reported, not raised, during export)."""
