"""`petgrid encode`: PET + CT + mask -> fused token matrix T and pooled/projected V."""

from pathlib import Path

from ..exporters.export_tokens import write_token_file
from ..pyscripts.helpers.focal_prompt_helper import build_focal_prompt
from ..pyscripts.helpers.fusion_ref_helper import RefWeights, encode_fuse, focal_dims_for, pool_project
from ..pyscripts.helpers.volume_helper import resample, resample_mask
from ..pyscripts.parameters.models import PipelineConfig
from ..pyscripts.types.output_layout import OutputLayout
from ..pyscripts.utils.common_utils import setup_logger
from .crop_lesion import load_aligned_inputs


def pooled_path_for(out: str | Path) -> Path:
    """`x.tokens.bin` -> `x.pooled.bin`; any other name gets `.pooled.bin` in place of its suffix."""
    out = Path(out)
    if out.name.endswith(OutputLayout.TOKENS_SUFFIX):
        return out.with_name(out.name[: -len(OutputLayout.TOKENS_SUFFIX)] + OutputLayout.POOLED_SUFFIX)
    return out.with_name(out.stem + OutputLayout.POOLED_SUFFIX)


def run_encode(config: PipelineConfig, pet: str, ct: str | None, mask: str, out: str) -> tuple[Path, Path]:
    """Encode one lesion on the canonical grid and write T to `out` and V next to it.

    Returns:
        (token file, pooled file)
    """
    logger = setup_logger('run_encode', level=config.log_level)
    pet_volume, ct_volume, lesion_mask = load_aligned_inputs(pet, ct, mask, config.grid)
    if pet_volume.dims != config.grid.dims or pet_volume.spacing != config.grid.spacing:
        source_spacing, source_origin = pet_volume.spacing, pet_volume.origin
        pet_volume = resample(pet_volume, config.grid)
        ct_volume = resample(ct_volume, config.grid)
        lesion_mask = resample_mask(lesion_mask, source_spacing, config.grid, source_origin)

    focal_patch = config.focal_patch
    focal_dims = focal_dims_for(config.grid.dims, config.patch, focal_patch)
    focal, _ = build_focal_prompt(
        pet_volume, ct_volume, lesion_mask, config.focal, config.perturb, resampled_dims=focal_dims
    )
    weights = RefWeights.from_fusion_spec(config.fusion, config.patch, focal_patch)
    tokens = encode_fuse(pet_volume, ct_volume, lesion_mask, focal, config.patch, focal_patch, weights, config.fusion)
    pooled = pool_project(tokens, weights, config.fusion.pool_factor)

    tokens_path = write_token_file(out, tokens.data)
    pooled_path = write_token_file(pooled_path_for(out), pooled.data)
    logger.info(f"Wrote T {tokens.rows}x{tokens.cols} to {tokens_path} and V {pooled.rows}x{pooled.cols} to {pooled_path}")
    return tokens_path, pooled_path
