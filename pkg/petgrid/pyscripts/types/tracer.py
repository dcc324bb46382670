"""Radiotracer definitions recognised in report text."""

from enum import Enum

from ._base import CaseInsensitiveEnumMixin


class Tracer(CaseInsensitiveEnumMixin, str, Enum):
    """Radiotracers the pattern inventory can detect

    Patterns for each tracer live in resources/measurement_patterns.yml under `tracers`.
    """

    FDG = "FDG"
    DOTATATE = "DOTATATE"
    FLUCICLOVINE = "FLUCICLOVINE"
    DCFPYL = "DCFPYL"
    UNKNOWN = "unknown"
