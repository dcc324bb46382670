"""`petgrid crop`: PET + CT + mask -> focal crop NIfTI files and crop.json."""

from pathlib import Path

from ..exporters.export_crop import export_crop
from ..pyscripts.helpers.exam_loader_helper import load_pet
from ..pyscripts.helpers.focal_prompt_helper import build_focal_prompt
from ..pyscripts.helpers.volume_helper import (
    LesionMask,
    Volume3D,
    load_mask_nifti,
    load_nifti,
    resample,
    resample_mask,
    zeros_like,
)
from ..pyscripts.parameters.models import GridSpec, PipelineConfig
from ..pyscripts.types.modality import Modality
from ..pyscripts.utils.common_utils import setup_logger

logger = setup_logger(__name__)


def load_aligned_inputs(
    pet: str, ct: str | None, mask: str, grid: GridSpec
) -> tuple[Volume3D, Volume3D, LesionMask]:
    """PET, CT and mask on one grid: their own when all dims agree, else all resampled onto `grid`."""
    pet_volume = load_pet(pet)
    lesion_mask, mask_volume = load_mask_nifti(mask)
    if ct:
        ct_volume = load_nifti(ct, Modality.CT)
    else:
        logger.warning("No CT given; using a zero CT")
        ct_volume = zeros_like(pet_volume, Modality.CT)

    if pet_volume.dims == lesion_mask.dims == ct_volume.dims:
        return pet_volume, ct_volume, lesion_mask
    return (
        resample(pet_volume, grid),
        resample(ct_volume, grid),
        resample_mask(lesion_mask, mask_volume.spacing, grid, mask_volume.origin),
    )


def run_crop(config: PipelineConfig, pet: str, ct: str | None, mask: str, out: str) -> dict:
    """Build the perturbed focal crop with perturb.rng_seed and write it to `out`.

    Returns:
        The crop sidecar
    """
    pet_volume, ct_volume, lesion_mask = load_aligned_inputs(pet, ct, mask, config.grid)
    focal, sidecar = build_focal_prompt(pet_volume, ct_volume, lesion_mask, config.focal, config.perturb)
    export_crop(Path(out), focal, sidecar)
    logger.info(f"Wrote focal crop (box side {focal.box_side}, dims {focal.resampled_dims}) to {out}")
    return sidecar
