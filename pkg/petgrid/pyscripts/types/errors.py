"""Error types raised by petgrid operations."""


class PetGridError(ValueError):
    """Base class for every petgrid error."""


# Volumes
class MalformedHeader(PetGridError):
    """File is not a readable single-file NIfTI-1 image."""


class UnsupportedDimensionality(PetGridError):
    """Image data is not three-dimensional."""


class NonFiniteData(PetGridError):
    """Volume contains NaN or infinite values."""


class NonPositiveDose(PetGridError):
    """Injected dose must be strictly positive."""


class NonPositiveWeight(PetGridError):
    """Patient weight must be strictly positive."""


class InvalidDecayFactor(PetGridError):
    """Decay factor must lie in (0, 1]."""


class NotPET(PetGridError):
    """Operation requires a PET volume."""


class EmptyResult(PetGridError):
    """All mask foreground fell outside the target grid."""


# Reports
class NoPairFound(PetGridError):
    """Sentence has SUV or slice mentions that cannot be paired."""


# Segmentation
class NoMatch(PetGridError):
    """No connected component matches the reported SUVmax and slice."""


class EmptyInitialThreshold(PetGridError):
    """Initial threshold leaves no voxels."""


class EmptyMask(PetGridError):
    """Operation needs at least one foreground voxel."""


# Fusion
class IndivisibleDims(PetGridError):
    """Volume dims are not divisible by the patch size."""


class IndivisibleTokens(PetGridError):
    """Token grid is not divisible by the pool factor."""


class TokenCountMismatch(PetGridError):
    """Global and focal token matrices differ in shape."""


# Metrics
class EmptyCorpus(PetGridError):
    """Metric called on an empty corpus."""


class LengthMismatch(PetGridError):
    """Paired samples differ in length or are too short."""


class DegenerateVariance(PetGridError):
    """Rank correlation undefined for constant input."""


# Configuration and batch
class ConfigInvalid(PetGridError):
    """Configuration failed to load or validate."""


class StageFailure(PetGridError):
    """A per-lesion pipeline stage failed.

    Attributes:
        stage: Name of the stage that raised ("load", "segment", "crop", "encode", "export")
        cause: The original exception
    """

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
