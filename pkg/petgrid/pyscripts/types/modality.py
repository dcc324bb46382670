"""Imaging modality definitions."""

from enum import Enum

from ._base import CaseInsensitiveEnumMixin


class Modality(CaseInsensitiveEnumMixin, str, Enum):
    """Modality tag carried by every volume

    - PET: values are standardized uptake values (SUV) once scaled
    - CT: values are Hounsfield units
    """

    PET = "PET"
    CT = "CT"
