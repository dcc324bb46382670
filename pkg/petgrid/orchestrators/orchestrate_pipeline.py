"""End-to-end run: parse reports, then segment, crop and encode every non-prior lesion.

Per-lesion artifacts are content addressed by `<exam_id>_<lesion_index:03d>_<hash>` where the hash
covers the record, the input file digests and every parameter section that affects the lesion.
`lesions/<key>.json` is written last and marks a lesion complete; a rerun skips completed lesions.
Only this thread writes the JSONL and summary files, sorted, so the worker count never changes them.
seg_results.jsonl, records.jsonl and summary.json are regenerated on every run from the completion
markers plus the newly processed lesions; rows are never appended to an earlier file.
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path

from .. import __version__
from ..exporters.export_crop import export_crop
from ..exporters.export_tokens import write_token_file
from ..pyscripts.helpers.exam_loader_helper import ExamVolumes, collect_exam_dates, load_exam
from ..pyscripts.helpers.focal_prompt_helper import build_focal_prompt, derive_seed
from ..pyscripts.helpers.fusion_ref_helper import RefWeights, encode_fuse, focal_dims_for, pool_project
from ..pyscripts.helpers.lesion_batch_helper import LesionBatchManager, LesionTask, LesionTaskResult
from ..pyscripts.helpers.lesion_seg_helper import segment_lesion
from ..pyscripts.helpers.report_parse_helper import LesionRecord, ParsedReport, ReportParseHelper, write_records
from ..pyscripts.helpers.volume_helper import map_slice_index, save_mask_nifti
from ..pyscripts.parameters.models import PerturbSpec, PipelineConfig
from ..pyscripts.types.errors import ConfigInvalid, PetGridError, StageFailure
from ..pyscripts.types.output_layout import OutputLayout
from ..pyscripts.utils import common_utils as utils
from ..pyscripts.utils.common_utils import setup_logger

STAGES = ("load", "segment", "crop", "encode", "export")
PRIOR_REFERENCE_REASON = "prior reference"


@dataclass(frozen=True, eq=False)
class LesionInputs:
    """Everything one lesion task needs; volumes are shared read-only across an exam's tasks."""

    record: LesionRecord
    exam: ExamVolumes | None
    load_error: Exception | None = None


class LesionStageRunner:
    """Runs segment -> crop -> encode -> export for one lesion task."""

    def __init__(self, config: PipelineConfig, output_dir: Path, weights: RefWeights):
        self.config = config
        self.output_dir = output_dir
        self.weights = weights
        self.global_patch = config.patch
        self.focal_patch = config.focal_patch
        self.focal_dims = focal_dims_for(config.grid.dims, self.global_patch, self.focal_patch)

    def __call__(self, task: LesionTask) -> dict:
        inputs: LesionInputs = task.payload
        if inputs.exam is None:
            raise StageFailure("load", inputs.load_error or PetGridError(f"Exam {task.exam_id} not loaded"))
        exam = inputs.exam
        record = inputs.record
        key = task.key
        layout = OutputLayout

        try:
            slice_index = map_slice_index(record.slice_index, exam.pet_native, exam.pet)
            seg = segment_lesion(exam.pet, record, self.config.seg, slice_index=slice_index)
            save_mask_nifti(
                seg.mask, self.output_dir / layout.MASKS_DIR / f"{key}{layout.NIFTI_SUFFIX}", exam.pet.spacing, exam.pet.origin
            )
        except Exception as e:  # pylint: disable=broad-exception-caught
            raise StageFailure("segment", e) from e

        try:
            perturb = PerturbSpec(
                fraction=self.config.perturb.fraction,
                rng_seed=derive_seed(self.config.perturb.rng_seed, task.exam_id, task.lesion_index),
            )
            focal, sidecar = build_focal_prompt(
                exam.pet, exam.ct, seg.mask, self.config.focal, perturb, resampled_dims=self.focal_dims
            )
            export_crop(self.output_dir / layout.CROPS_DIR / key, focal, sidecar)
        except Exception as e:  # pylint: disable=broad-exception-caught
            raise StageFailure("crop", e) from e

        try:
            tokens = encode_fuse(
                exam.pet, exam.ct, seg.mask, focal, self.global_patch, self.focal_patch, self.weights, self.config.fusion
            )
            pooled = pool_project(tokens, self.weights, self.config.fusion.pool_factor)
            tokens_dir = self.output_dir / layout.TOKENS_DIR
            write_token_file(tokens_dir / f"{key}{layout.TOKENS_SUFFIX}", tokens.data)
            write_token_file(tokens_dir / f"{key}{layout.POOLED_SUFFIX}", pooled.data)
        except Exception as e:  # pylint: disable=broad-exception-caught
            raise StageFailure("encode", e) from e

        output = {
            "key": key,
            "exam_id": task.exam_id,
            "lesion_index": task.lesion_index,
            "record": record.to_dict(),
            "slice_index": slice_index,
            "seg": seg.to_metadata(),
            "crop": sidecar,
            "tokens": {"rows": tokens.rows, "cols": tokens.cols, "grid": list(tokens.grid)},
            "pooled": {"rows": pooled.rows, "cols": pooled.cols, "grid": list(pooled.grid)},
        }
        try:
            utils.write_json(self.output_dir / layout.LESIONS_DIR / f"{key}.json", output)
        except Exception as e:  # pylint: disable=broad-exception-caught
            raise StageFailure("export", e) from e
        return output


class PipelineRunner:
    """Runs the whole pipeline for one input tree and writes the output tree and summary."""

    def __init__(self, config: PipelineConfig, log_level: int | str | None = None):
        """
        Args:
            config: Validated pipeline configuration with paths.input_dir and paths.output_dir set
            log_level: Overrides config.log_level
        """
        if not config.paths.input_dir or not config.paths.output_dir:
            raise ConfigInvalid("paths.input_dir and paths.output_dir are required to run the pipeline")
        self.config = config
        self.log_level = log_level or config.log_level or logging.INFO
        self.logger = setup_logger('PipelineRunner', level=self.log_level)
        self.input_dir = Path(config.paths.input_dir)
        self.output_dir = Path(config.paths.output_dir)

    def lesion_key(self, record: LesionRecord, lesion_index: int, exam: ExamVolumes | None) -> str:
        """Content-addressed key for one lesion."""
        config = self.config
        payload = {
            "version": __version__,
            "record": record.to_dict(),
            "inputs": exam.digests if exam is not None else None,
            "grid": asdict(config.grid),
            "seg": asdict(config.seg),
            "perturb": asdict(config.perturb),
            "focal": asdict(config.focal),
            "patch": asdict(config.patch),
            "fusion": asdict(config.fusion),
        }
        name = utils.sanitize_filename(record.exam_id)
        return f"{name}_{lesion_index:03d}_{utils.content_hash(payload)}"

    def run(self) -> dict:
        """Run the pipeline.

        Returns:
            The summary written to summary.json

        Raises:
            PetGridError: If the input directory does not exist
        """
        if not self.input_dir.is_dir():
            raise PetGridError(f"Input directory not found: {self.input_dir}")
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger.info(f"Running pipeline: {self.input_dir} -> {self.output_dir}")

        reports = self._parse_reports()
        all_records = [record for report in reports for record in report.records]
        write_records(self.output_dir / OutputLayout.RECORDS_FILE, all_records)

        weights = RefWeights.from_fusion_spec(self.config.fusion, self.config.patch, self.config.focal_patch)
        stage_runner = LesionStageRunner(self.config, self.output_dir, weights)
        manager = LesionBatchManager(stage_runner, concurrency=self.config.workers, log_level=self.log_level)

        results: list[LesionTaskResult] = []
        skipped = []
        resumed = 0
        for report in reports:
            exam, load_error = self._load_exam(report)
            tasks = []
            for lesion_index, record in enumerate(report.records):
                if record.is_prior_reference:
                    skipped.append(
                        {"exam_id": report.exam_id, "lesion_index": lesion_index, "reason": PRIOR_REFERENCE_REASON}
                    )
                    continue
                key = self.lesion_key(record, lesion_index, exam)
                marker = self.output_dir / OutputLayout.LESIONS_DIR / f"{key}.json"
                if marker.is_file():
                    resumed += 1
                    results.append(
                        LesionTaskResult(
                            index=len(results) + len(tasks),
                            exam_id=report.exam_id,
                            lesion_index=lesion_index,
                            key=key,
                            status="ok",
                            output=utils.read_json(marker),
                        )
                    )
                    continue
                tasks.append(
                    LesionTask(
                        index=len(results) + len(tasks),
                        exam_id=report.exam_id,
                        lesion_index=lesion_index,
                        key=key,
                        payload=LesionInputs(record=record, exam=exam, load_error=load_error),
                    )
                )
            results.extend(manager.run(tasks))

        if resumed:
            self.logger.info(f"Skipped {resumed} lesions completed by an earlier run")
        results.sort(key=lambda r: (r.exam_id, r.lesion_index))
        utils.write_jsonl(self.output_dir / OutputLayout.SEG_RESULTS_FILE, (self._seg_row(r) for r in results))

        summary = self._summary(reports, all_records, results, skipped)
        utils.write_json(self.output_dir / OutputLayout.SUMMARY_FILE, summary)
        self.logger.info(
            f"Pipeline finished: {summary['lesions']['succeeded']} lesions succeeded, "
            f"{summary['lesions']['failed']} failed, {len(skipped)} skipped"
        )
        return summary

    def _parse_reports(self) -> list[ParsedReport]:
        reports_dir = self.input_dir / OutputLayout.REPORTS_INPUT_DIR
        if not reports_dir.is_dir():
            self.logger.warning(f"No reports directory at {reports_dir}")
            return []
        parser = ReportParseHelper.from_paths(
            lexicon_path=self.config.paths.lexicon,
            patterns_path=self.config.paths.patterns,
            report_format=self.config.report_format,
            log_level=self.log_level,
        )
        exam_dates = collect_exam_dates(self.input_dir / OutputLayout.PET_INPUT_DIR)
        return parser.process_directory(str(reports_dir), exam_dates=exam_dates)

    def _load_exam(self, report: ParsedReport) -> tuple[ExamVolumes | None, Exception | None]:
        if not any(not r.is_prior_reference for r in report.records):
            return None, None
        try:
            return load_exam(report.exam_id, self.input_dir, self.config.grid), None
        except Exception as e:  # pylint: disable=broad-exception-caught
            self.logger.error(f"Failed to load volumes for exam {report.exam_id}: {e}")
            return None, e

    @staticmethod
    def _seg_row(result: LesionTaskResult) -> dict:
        row = {
            "key": result.key,
            "exam_id": result.exam_id,
            "lesion_index": result.lesion_index,
            "status": result.status,
        }
        if result.ok:
            row.update(result.output["seg"])
            row["slice_index"] = result.output["slice_index"]
        else:
            row["stage"] = result.stage
            row["error"] = result.error
        return row

    @staticmethod
    def _summary(
        reports: list[ParsedReport], records: list[LesionRecord], results: list[LesionTaskResult], skipped: list[dict]
    ) -> dict:
        stage_counts = {stage: 0 for stage in STAGES}
        for result in results:
            passed = STAGES if result.ok else STAGES[: STAGES.index(result.stage)] if result.stage in STAGES else ()
            for stage in passed:
                stage_counts[stage] += 1

        failures = [
            {
                "key": r.key,
                "exam_id": r.exam_id,
                "lesion_index": r.lesion_index,
                "stage": r.stage,
                "error": r.error,
            }
            for r in results
            if not r.ok
        ]
        return {
            "exams": {
                report.exam_id: {
                    "tracer": report.tracer.value,
                    "sentences": len(report.sentences),
                    "candidates": len(report.candidate_indices),
                    "unpaired": len(report.unpaired_indices),
                    "records": len(report.records),
                }
                for report in reports
            },
            "records": {
                "total": len(records),
                "prior_reference": sum(1 for r in records if r.is_prior_reference),
            },
            "lesions": {
                "attempted": len(results),
                "succeeded": sum(1 for r in results if r.ok),
                "failed": len(failures),
                "skipped": len(skipped),
            },
            "stages": stage_counts,
            "skipped": skipped,
            "failures": failures,
        }


def run_pipeline(config: PipelineConfig) -> dict:
    """Run the pipeline for a validated config and return the summary."""
    return PipelineRunner(config).run()
