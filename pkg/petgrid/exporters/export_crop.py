"""Write a focal crop as three NIfTI files plus its JSON sidecar."""

from pathlib import Path

from ..pyscripts.helpers.focal_prompt_helper import FocalCrop
from ..pyscripts.helpers.volume_helper import save_mask_nifti, save_nifti
from ..pyscripts.types.output_layout import OutputLayout
from ..pyscripts.utils.common_utils import write_json


def export_crop(crop_dir: str | Path, focal: FocalCrop, sidecar: dict) -> Path:
    """Write pet/ct/mask crops and crop.json into crop_dir."""
    crop_dir = Path(crop_dir)
    crop_dir.mkdir(parents=True, exist_ok=True)
    suffix = OutputLayout.NIFTI_SUFFIX
    save_nifti(focal.pet_crop, crop_dir / f"pet{suffix}")
    save_nifti(focal.ct_crop, crop_dir / f"ct{suffix}")
    save_mask_nifti(focal.mask_crop, crop_dir / f"mask{suffix}", focal.pet_crop.spacing, focal.pet_crop.origin)
    write_json(crop_dir / OutputLayout.CROP_SIDECAR_FILE, sidecar)
    return crop_dir
