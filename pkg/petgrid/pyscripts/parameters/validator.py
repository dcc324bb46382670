"""Parameter validation for petgrid."""

from ..types.connectivity import Connectivity
from ..types.errors import ConfigInvalid
from ..types.log_level import LogLevel
from ..types.report_format import ReportFormat
from .models import PipelineConfig

_MAX_SEED = 2**64 - 1


class PipelineConfigValidator:
    """Validates PipelineConfig with error accumulation."""

    def __init__(self):
        self.errors: list[str] = []

    def validate(self, config: PipelineConfig) -> list[str]:
        """Validate configuration.

        Args:
            config: PipelineConfig instance to validate

        Returns:
            List of validation error messages. Empty list if all validations pass.
        """
        self.errors = []

        # Enum validations
        self._validate_enum(config.log_level, LogLevel.get_supported_values(), "log_level")
        self._validate_enum(config.report_format, ReportFormat.get_supported_values(), "report_format")
        self._validate_positive_int(config.workers, "workers")

        # Grid
        self._validate_positive_float(config.grid.target_spacing, "grid.target_spacing")
        self._validate_triple(config.grid.target_dims, "grid.target_dims")

        # Segmentation
        seg = config.seg
        self._validate_open_fraction(seg.initial_fraction, "seg.initial_fraction")
        self._validate_positive_float(seg.suv_tolerance, "seg.suv_tolerance")
        if seg.connectivity not in Connectivity.get_supported_values():
            supported = ', '.join(str(v) for v in Connectivity.get_supported_values())
            self.errors.append(f"Invalid seg.connectivity: '{seg.connectivity}'. Supported: {supported}")
        self._validate_open_fraction(seg.refine_step, "seg.refine_step")
        self._validate_positive_float(seg.stabilize_eps, "seg.stabilize_eps")
        self._validate_positive_int(seg.max_iters, "seg.max_iters")
        self._validate_non_negative_float(seg.background_margin, "seg.background_margin")

        # Focal prompt
        if not 0.0 <= config.perturb.fraction < 0.5:
            self.errors.append(f"perturb.fraction must be in [0, 0.5), got: {config.perturb.fraction}")
        self._validate_seed(config.perturb.rng_seed, "perturb.rng_seed")
        self._validate_non_negative_float(config.focal.margin_fraction, "focal.margin_fraction")
        self._validate_positive_int(config.focal.min_side, "focal.min_side")
        self._validate_triple(config.focal.resampled_dims, "focal.resampled_dims")
        self._validate_triple(config.focal.patch_size, "focal.patch_size")

        # Fusion
        self._validate_triple(config.patch.patch_size, "patch.patch_size")
        self._validate_positive_int(config.patch.embed_dim, "patch.embed_dim")
        self._validate_positive_int(config.fusion.lm_dim, "fusion.lm_dim")
        self._validate_positive_int(config.fusion.pool_factor, "fusion.pool_factor")
        self._validate_positive_int(config.fusion.mask_bins, "fusion.mask_bins")
        self._validate_seed(config.fusion.seed, "fusion.seed")

        # Dependency validations
        if not self.errors:
            self._validate_patch_grid(config)

        return self.errors

    def validate_or_raise(self, config: PipelineConfig) -> None:
        """Validate and raise one ConfigInvalid listing every error."""
        errors = self.validate(config)
        if errors:
            details = "\n".join(f"- {error}" for error in errors)
            raise ConfigInvalid(f"Invalid configuration:\n{details}")

    def _validate_enum(self, value: str | None, valid_values: list[str], param_name: str) -> None:
        """Validate enum parameter against valid values."""
        if value is None:
            self.errors.append(f"{param_name} is required but got None")
            return
        if value not in valid_values:
            self.errors.append(f"Invalid {param_name}: '{value}'. Supported: {', '.join(valid_values)}")

    def _validate_positive_int(self, value: int | None, param_name: str) -> None:
        """Validate that integer parameter is positive."""
        if value is None:
            self.errors.append(f"{param_name} is required but got None")
            return
        if not isinstance(value, int) or isinstance(value, bool):
            self.errors.append(f"{param_name} must be int, got {type(value).__name__}")
            return
        if value <= 0:
            self.errors.append(f"{param_name} must be positive, got: {value}")

    def _validate_positive_float(self, value: float | None, param_name: str) -> None:
        """Validate that a real parameter is strictly positive."""
        if value is None:
            self.errors.append(f"{param_name} is required but got None")
            return
        if value <= 0:
            self.errors.append(f"{param_name} must be positive, got: {value}")

    def _validate_non_negative_float(self, value: float | None, param_name: str) -> None:
        """Validate that a real parameter is >= 0."""
        if value is None:
            self.errors.append(f"{param_name} is required but got None")
            return
        if value < 0:
            self.errors.append(f"{param_name} must be non-negative, got: {value}")

    def _validate_open_fraction(self, value: float | None, param_name: str) -> None:
        """Validate that a fraction lies strictly between 0 and 1."""
        if value is None:
            self.errors.append(f"{param_name} is required but got None")
            return
        if not 0.0 < value < 1.0:
            self.errors.append(f"{param_name} must be in (0, 1), got: {value}")

    def _validate_seed(self, value: int | None, param_name: str) -> None:
        """Validate a 64-bit unsigned seed."""
        if value is None or not 0 <= value <= _MAX_SEED:
            self.errors.append(f"{param_name} must be an integer in [0, 2^64), got: {value}")

    def _validate_triple(self, values, param_name: str) -> None:
        """Validate a list of three positive integers."""
        if values is None or len(values) != 3:
            self.errors.append(f"{param_name} must have exactly 3 entries, got: {values}")
            return
        if any(v <= 0 for v in values):
            self.errors.append(f"{param_name} entries must be positive, got: {list(values)}")

    def _validate_patch_grid(self, config: PipelineConfig) -> None:
        """Validate that patch and pool sizes tile the canonical grid."""
        dims = config.grid.dims
        patch = config.patch.size
        if any(d % s for d, s in zip(dims, patch)):
            self.errors.append(f"grid.target_dims {list(dims)} must be divisible by patch.patch_size {list(patch)}")
            return
        token_grid = [d // s for d, s in zip(dims, patch)]
        factor = config.fusion.pool_factor
        if any(g % factor for g in token_grid):
            self.errors.append(f"token grid {token_grid} must be divisible by fusion.pool_factor {factor}")
