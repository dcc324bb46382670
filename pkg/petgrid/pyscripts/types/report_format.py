"""Report text layout definitions for sentence splitting."""

from enum import Enum

from ._base import CaseInsensitiveEnumMixin


class ReportFormat(CaseInsensitiveEnumMixin, str, Enum):
    """Layout of report text files

    - LINES: one sentence per non-empty line
    - RAW: free text, split with the period + capital heuristic
    """

    LINES = "lines"
    RAW = "raw"
