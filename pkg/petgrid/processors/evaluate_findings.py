"""`petgrid eval`: predictions + references (+ human scores) -> report.json."""

from ..pyscripts.helpers.metrics_helper import EvalReport, evaluate, load_eval_pairs
from ..pyscripts.parameters.models import PipelineConfig
from ..pyscripts.utils import common_utils as utils
from ..pyscripts.utils.common_utils import setup_logger


def run_eval(
    config: PipelineConfig,
    pred: str,
    ref: str,
    out: str,
    human: str | None = None,
    cider_length_penalty: bool = False,
) -> EvalReport:
    """Score predictions against references and write the versioned report."""
    logger = setup_logger('run_eval', level=config.log_level)
    pairs = load_eval_pairs(pred, ref, human)
    report = evaluate(pairs, cider_length_penalty=cider_length_penalty)
    utils.write_json(out, report.to_dict())
    logger.info(f"Wrote evaluation of {report.pair_count} pairs to {out}")
    return report
