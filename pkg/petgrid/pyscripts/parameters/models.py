"""Configuration dataclasses for petgrid.

Each section doubles as the structured schema OmegaConf merges config files into, so a key that is
not a field here is rejected at load time.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from ..types.log_level import LogLevel
from ..types.report_format import ReportFormat


def _triple(values) -> tuple[int, int, int]:
    return tuple(int(v) for v in values)


@dataclass
class GridSpec:
    """Canonical grid every volume is resampled onto."""

    target_spacing: float = 3.0
    target_dims: List[int] = field(default_factory=lambda: [192, 192, 352])

    @property
    def dims(self) -> tuple[int, int, int]:
        return _triple(self.target_dims)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (float(self.target_spacing),) * 3


@dataclass
class SegParams:
    """Iterative-threshold segmentation parameters.

    Attributes:
        initial_fraction: Fraction of the reported SUVmax used as the first threshold
        suv_tolerance: Allowed |component max - reported SUVmax|
        connectivity: Voxel neighbourhood (6, 18 or 26)
        refine_step: Largest threshold move per iteration, as a fraction of the peak SUV
        stabilize_eps: Relative voxel-count change below which the contour is stable
        max_iters: Refinement iteration cap
        background_margin: SUV added to the local background estimate
    """

    initial_fraction: float = 0.5
    suv_tolerance: float = 0.1
    connectivity: int = 26
    refine_step: float = 0.05
    stabilize_eps: float = 0.01
    max_iters: int = 50
    background_margin: float = 0.5


@dataclass
class PerturbSpec:
    """Focal crop perturbation: uniform draws bounded by fraction * side."""

    fraction: float = 0.2
    rng_seed: int = 0


@dataclass
class FocalSpec:
    """Focal crop geometry before perturbation."""

    margin_fraction: float = 0.25
    min_side: int = 16
    resampled_dims: List[int] = field(default_factory=lambda: [32, 32, 32])
    patch_size: List[int] = field(default_factory=lambda: [8, 8, 8])

    @property
    def dims(self) -> tuple[int, int, int]:
        return _triple(self.resampled_dims)


@dataclass
class PatchSpec:
    """Non-overlapping 3D patch tokenization."""

    patch_size: List[int] = field(default_factory=lambda: [16, 16, 16])
    embed_dim: int = 64

    @property
    def size(self) -> tuple[int, int, int]:
        return _triple(self.patch_size)

    @property
    def voxels_per_patch(self) -> int:
        s_d, s_w, s_h = self.size
        return s_d * s_w * s_h


@dataclass
class FusionSpec:
    """Reference encoder settings: weight seed, pooling, projection and ablation switches."""

    lm_dim: int = 128
    pool_factor: int = 2
    mask_bins: int = 16
    seed: int = 0
    use_mask: bool = True
    use_ct: bool = True
    use_focal: bool = True


@dataclass
class PathsConfig:
    """Input and output locations. Resource paths default to the shipped files."""

    input_dir: Optional[str] = None
    output_dir: Optional[str] = None
    lexicon: Optional[str] = None
    patterns: Optional[str] = None


@dataclass
class PipelineConfig:  # pylint: disable=too-many-instance-attributes
    """Complete petgrid configuration from petgrid_config.yml, a user file and CLI overrides."""

    grid: GridSpec = field(default_factory=GridSpec)
    seg: SegParams = field(default_factory=SegParams)
    perturb: PerturbSpec = field(default_factory=PerturbSpec)
    focal: FocalSpec = field(default_factory=FocalSpec)
    patch: PatchSpec = field(default_factory=PatchSpec)
    fusion: FusionSpec = field(default_factory=FusionSpec)
    paths: PathsConfig = field(default_factory=PathsConfig)
    workers: int = 4
    log_level: str = "INFO"
    report_format: str = "lines"

    # Enum fields that need normalization
    _ENUM_NORMALIZERS = {
        'log_level': LogLevel.normalize,
        'report_format': ReportFormat.normalize,
    }

    def __post_init__(self):
        """Normalize enum values case-insensitively.

        If normalization fails the original value is kept and reported by the validator.
        """
        for key, normalizer in self._ENUM_NORMALIZERS.items():
            value = getattr(self, key)
            if value is not None:
                try:
                    setattr(self, key, normalizer(value))
                except ValueError:
                    pass

    @property
    def focal_patch(self) -> PatchSpec:
        """Patch spec of the focal path (focal patch size, shared embedding width)."""
        return PatchSpec(patch_size=list(self.focal.patch_size), embed_dim=self.patch.embed_dim)

    def to_dict(self) -> dict:
        return asdict(self)

    def __str__(self) -> str:
        """Return string representation of all parameters."""
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)
