"""`petgrid segment`: one PET volume + records.jsonl -> masks and a SegResult sidecar."""

from pathlib import Path

from ..pyscripts.helpers.exam_loader_helper import load_pet
from ..pyscripts.helpers.lesion_seg_helper import segment_lesion
from ..pyscripts.helpers.report_parse_helper import read_records
from ..pyscripts.helpers.volume_helper import map_slice_index, resample, save_mask_nifti
from ..pyscripts.parameters.models import PipelineConfig
from ..pyscripts.types.errors import PetGridError
from ..pyscripts.types.output_layout import OutputLayout
from ..pyscripts.utils import common_utils as utils
from ..pyscripts.utils.common_utils import setup_logger


def run_segment(config: PipelineConfig, pet: str, records: str, out: str) -> tuple[int, int]:
    """Segment every non-prior record of the PET file's exam on the configured working grid.

    Masks go to `<out>/<exam>_<lesion_index:03d>.nii.gz`; one row per attempted record is written to
    `<out>/seg_results.jsonl`, replacing any earlier file. A record that fails is logged and recorded, never fatal.

    Returns:
        (succeeded, failed)
    """
    logger = setup_logger('run_segment', level=config.log_level)
    params = config.seg
    out_dir = Path(out)
    exam_id = utils.file_stem(pet)

    pet_native = load_pet(pet)
    pet_working = resample(pet_native, config.grid)
    exam_records = [r for r in read_records(records) if r.exam_id == exam_id]
    if not exam_records:
        logger.warning(f"No records for exam {exam_id} in {records}")

    rows = []
    succeeded = 0
    for lesion_index, record in enumerate(exam_records):
        if record.is_prior_reference:
            continue
        name = f"{utils.sanitize_filename(exam_id)}_{lesion_index:03d}"
        row = {"exam_id": exam_id, "lesion_index": lesion_index, "sentence_index": record.sentence_index}
        try:
            slice_index = map_slice_index(record.slice_index, pet_native, pet_working)
            result = segment_lesion(pet_working, record, params, slice_index=slice_index)
            mask_path = out_dir / f"{name}{OutputLayout.NIFTI_SUFFIX}"
            save_mask_nifti(result.mask, mask_path, pet_working.spacing, pet_working.origin)
            row.update(result.to_metadata(), status="ok", mask=mask_path.name, slice_index=slice_index)
            succeeded += 1
        except PetGridError as e:
            logger.error(f"Lesion {name} failed: {type(e).__name__}: {e}")
            row.update(status="failed", error=f"{type(e).__name__}: {e}")
        rows.append(row)

    utils.write_jsonl(out_dir / OutputLayout.SEG_RESULTS_FILE, rows)
    failed = len(rows) - succeeded
    logger.info(f"Segmented {succeeded} of {len(rows)} lesions for exam {exam_id} ({failed} failed)")
    return succeeded, failed
