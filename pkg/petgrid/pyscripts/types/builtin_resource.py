"""Built-in resource file definitions for petgrid."""

from enum import Enum
from pathlib import Path


class BuiltinResource(str, Enum):
    """Data files shipped under resources/"""

    DEFAULT_CONFIG = "petgrid_config.yml"
    ANATOMY_LEXICON = "anatomy_lexicon.tsv"
    MEASUREMENT_PATTERNS = "measurement_patterns.yml"

    @property
    def path(self) -> Path:
        """Complete absolute path to the resource file"""
        return self._base_dir() / "resources" / self.value

    def exists(self) -> bool:
        """Check if the resource file exists"""
        return self.path.exists()

    @staticmethod
    def _base_dir() -> Path:
        """Repository root"""
        return Path(__file__).parent.parent.parent.parent
