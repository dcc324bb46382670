"""Log levels accepted by `log_level` in the config and selected by `--verbose`."""

import logging
from enum import Enum

from ._base import CaseInsensitiveEnumMixin


class LogLevel(CaseInsensitiveEnumMixin, str, Enum):
    """Verbosity of stage progress and per-lesion output. DEBUG adds per-lesion start lines and loaded configs."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"

    @classmethod
    def for_verbose(cls, verbose: bool) -> "LogLevel":
        return cls.DEBUG if verbose else cls.INFO

    @property
    def numeric(self) -> int:
        return logging.getLevelName(self.value)
