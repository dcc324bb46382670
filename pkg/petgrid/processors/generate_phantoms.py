"""`petgrid phantom`: write a ready-to-run synthetic input tree."""

from pathlib import Path

from ..pyscripts.helpers.phantom_helper import make_phantom, random_phantom
from ..pyscripts.helpers.volume_helper import save_mask_nifti, save_nifti
from ..pyscripts.types.output_layout import OutputLayout
from ..pyscripts.utils.common_utils import setup_logger


def run_phantom(
    out: str,
    seed: int = 0,
    blobs: int | None = None,
    count: int = 1,
    dims: tuple[int, int, int] = (64, 64, 64),
    spacing: float = 3.0,
    with_background: bool | None = None,
    noise_std: float = 0.0,
    log_level: int | str = "INFO",
) -> list[str]:
    """Generate `count` phantoms with seeds seed, seed + 1, ...

    Writes reports/<exam>.txt, pet/<exam>.nii.gz, ct/<exam>.nii.gz and truth/<exam>_<k:03d>.nii.gz.

    Returns:
        Exam ids written
    """
    logger = setup_logger('run_phantom', level=log_level)
    root = Path(out)
    layout = OutputLayout
    exam_ids = []
    for offset in range(count):
        phantom_seed = seed + offset
        phantom = random_phantom(
            phantom_seed,
            n_blobs=blobs,
            dims=dims,
            spacing=spacing,
            with_background=with_background,
            noise_std=noise_std,
            exam_id=f"phantom_{phantom_seed:04d}",
        )
        case = make_phantom(phantom, seed=phantom_seed)
        exam_id = phantom.exam_id

        report_path = root / layout.REPORTS_INPUT_DIR / f"{exam_id}.txt"
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(case.report_text, encoding="utf-8")
        save_nifti(case.pet, root / layout.PET_INPUT_DIR / f"{exam_id}{layout.NIFTI_SUFFIX}")
        save_nifti(case.ct, root / layout.CT_INPUT_DIR / f"{exam_id}{layout.NIFTI_SUFFIX}")
        for k, mask in enumerate(case.truth_masks):
            truth_path = root / layout.TRUTH_INPUT_DIR / f"{exam_id}_{k:03d}{layout.NIFTI_SUFFIX}"
            save_mask_nifti(mask, truth_path, case.pet.spacing, case.pet.origin)
        exam_ids.append(exam_id)
        logger.info(f"Wrote phantom {exam_id} with {len(phantom.blobs)} blobs")
    return exam_ids
