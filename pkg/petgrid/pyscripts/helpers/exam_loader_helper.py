"""Per-exam volume loading: PET with optional SUV sidecar, CT (or a zero stand-in), working grid."""

from dataclasses import dataclass
from datetime import date
from pathlib import Path

from ..parameters.models import GridSpec
from ..types.errors import PetGridError
from ..types.modality import Modality
from ..types.output_layout import OutputLayout
from ..utils import common_utils as utils
from ..utils.common_utils import setup_logger
from .volume_helper import Volume3D, load_nifti, resample, suv_scale, zeros_like

logger = setup_logger(__name__)

SIDECAR_KEYS = ("injected_dose_bq", "weight_kg", "decay_factor", "exam_date")


@dataclass(frozen=True, eq=False)
class ExamVolumes:
    """Volumes of one exam.

    Attributes:
        exam_id: Exam identifier (file stem)
        pet_native: PET in SUV on its own grid (slice numbers refer to this grid)
        pet: PET on the working grid
        ct: CT on the working grid (zeros when the exam has no CT)
        digests: SHA-256 of every input file, for content-addressed outputs
    """

    exam_id: str
    pet_native: Volume3D
    pet: Volume3D
    ct: Volume3D
    digests: dict


def sidecar_path_for(pet_path: str | Path) -> Path:
    pet_path = Path(pet_path)
    return pet_path.with_name(f"{utils.file_stem(pet_path)}.json")


def read_pet_sidecar(path: str | Path) -> dict:
    """Read `<exam>.json` next to a PET file; unknown keys are rejected."""
    sidecar = utils.read_json(path)
    if not isinstance(sidecar, dict):
        raise PetGridError(f"PET sidecar {path} must be a JSON object")
    unknown = set(sidecar) - set(SIDECAR_KEYS)
    if unknown:
        raise PetGridError(f"PET sidecar {path} has unknown keys: {sorted(unknown)}")
    return sidecar


def exam_date_of(sidecar: dict) -> date | None:
    value = sidecar.get("exam_date")
    if not value:
        return None
    try:
        return date.fromisoformat(str(value))
    except ValueError as e:
        raise PetGridError(f"exam_date must be YYYY-MM-DD, got {value!r}") from e


def collect_exam_dates(pet_dir: str | Path) -> dict[str, date]:
    """Exam dates from every PET sidecar in a directory."""
    dates = {}
    pet_dir = Path(pet_dir)
    if not pet_dir.is_dir():
        return dates
    for path in sorted(pet_dir.glob("*.json")):
        exam_date = exam_date_of(read_pet_sidecar(path))
        if exam_date is not None:
            dates[utils.file_stem(path)] = exam_date
    return dates


def load_pet(pet_path: str | Path, sidecar_path: str | Path | None = None) -> Volume3D:
    """Load PET; a sidecar with dose and weight converts activity to SUV."""
    pet = load_nifti(pet_path, Modality.PET)
    sidecar_path = Path(sidecar_path) if sidecar_path else sidecar_path_for(pet_path)
    if sidecar_path.is_file():
        sidecar = read_pet_sidecar(sidecar_path)
        if "injected_dose_bq" in sidecar or "weight_kg" in sidecar:
            pet = suv_scale(
                pet,
                float(sidecar.get("injected_dose_bq", 0.0)),
                float(sidecar.get("weight_kg", 0.0)),
                float(sidecar.get("decay_factor", 1.0)),
            )
            logger.debug(f"Applied SUV scaling from {sidecar_path}")
    return pet


def load_ct_or_zeros(ct_path: str | Path | None, reference: Volume3D, grid: GridSpec) -> Volume3D:
    """CT on the working grid, or zeros on the PET grid with a warning when there is no CT file."""
    if ct_path is None:
        logger.warning("No CT volume found; using a zero CT")
        return zeros_like(reference, Modality.CT)
    return resample(load_nifti(ct_path, Modality.CT), grid)


def load_exam(exam_id: str, input_dir: str | Path, grid: GridSpec) -> ExamVolumes:
    """Load `<input>/pet/<exam>.nii[.gz]` (+ sidecar) and `<input>/ct/<exam>.nii[.gz]`.

    Raises:
        PetGridError: If the exam has no PET volume, plus any volume loading error
    """
    input_dir = Path(input_dir)
    pet_path = utils.find_nifti(input_dir / OutputLayout.PET_INPUT_DIR, exam_id)
    if pet_path is None:
        raise PetGridError(f"No PET volume for exam {exam_id} under {input_dir / OutputLayout.PET_INPUT_DIR}")
    sidecar = sidecar_path_for(pet_path)
    ct_path = utils.find_nifti(input_dir / OutputLayout.CT_INPUT_DIR, exam_id)

    digests = {"pet": utils.file_digest(pet_path)}
    if sidecar.is_file():
        digests["pet_sidecar"] = utils.file_digest(sidecar)
    if ct_path is not None:
        digests["ct"] = utils.file_digest(ct_path)

    pet_native = load_pet(pet_path, sidecar)
    pet = resample(pet_native, grid)
    ct = load_ct_or_zeros(ct_path, pet, grid)
    logger.info(f"Loaded exam {exam_id}: PET {pet_native.dims} -> {pet.dims}, CT {'yes' if ct_path else 'zeros'}")
    return ExamVolumes(exam_id=exam_id, pet_native=pet_native, pet=pet, ct=ct, digests=digests)
