"""`petgrid parse`: report files -> records.jsonl."""

from pathlib import Path

from ..pyscripts.helpers.exam_loader_helper import collect_exam_dates
from ..pyscripts.helpers.report_parse_helper import ReportParseHelper, write_records
from ..pyscripts.parameters.models import PipelineConfig
from ..pyscripts.utils.common_utils import setup_logger


def run_parse(config: PipelineConfig, reports: str, out: str, pet_dir: str | None = None) -> int:
    """Parse every report under `reports` and write all records (prior references flagged) to `out`.

    Args:
        config: Pipeline configuration (report format, lexicon and pattern paths)
        reports: Directory, comma list or glob of report .txt files
        out: Output JSONL path
        pet_dir: Optional directory of PET sidecars carrying exam dates

    Returns:
        Number of records written
    """
    logger = setup_logger('run_parse', level=config.log_level)
    parser = ReportParseHelper.from_paths(
        lexicon_path=config.paths.lexicon,
        patterns_path=config.paths.patterns,
        report_format=config.report_format,
        log_level=config.log_level,
    )
    exam_dates = collect_exam_dates(pet_dir) if pet_dir else {}
    parsed = parser.process_directory(reports, exam_dates=exam_dates)
    records = [record for report in parsed for record in report.records]
    count = write_records(Path(out), records)
    logger.info(f"Wrote {count} records from {len(parsed)} reports to {out}")
    return count
