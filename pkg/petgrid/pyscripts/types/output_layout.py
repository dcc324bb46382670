"""Output directory layout constants for petgrid runs."""


class OutputLayout:
    """File and directory names written under a pipeline output directory

    Per-lesion artifacts are named by the lesion key
    `<exam_id>_<lesion_index:03d>_<content hash>`.
    """

    RECORDS_FILE = "records.jsonl"
    SEG_RESULTS_FILE = "seg_results.jsonl"
    SUMMARY_FILE = "summary.json"
    MASKS_DIR = "masks"
    CROPS_DIR = "crops"
    TOKENS_DIR = "tokens"
    LESIONS_DIR = "lesions"

    REPORTS_INPUT_DIR = "reports"
    PET_INPUT_DIR = "pet"
    CT_INPUT_DIR = "ct"
    TRUTH_INPUT_DIR = "truth"

    CROP_SIDECAR_FILE = "crop.json"
    TOKENS_SUFFIX = ".tokens.bin"
    POOLED_SUFFIX = ".pooled.bin"
    NIFTI_SUFFIX = ".nii.gz"
