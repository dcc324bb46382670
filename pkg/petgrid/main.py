"""Command-line entry point: `petgrid <subcommand> [options]`.

Exit codes: 0 on success (per-lesion soft failures included), 1 on a hard error
(invalid configuration, missing inputs, unreadable files), 2 on usage errors.
"""

import argparse
import sys
from collections.abc import Sequence
from typing import Any

from . import __version__
from .orchestrators.orchestrate_pipeline import run_pipeline
from .processors.crop_lesion import run_crop
from .processors.encode_tokens import run_encode
from .processors.evaluate_findings import run_eval
from .processors.generate_phantoms import run_phantom
from .processors.parse_reports import run_parse
from .processors.segment_lesions import run_segment
from .pyscripts.parameters.loader import ConfigLoader, load_pipeline_config
from .pyscripts.parameters.models import PipelineConfig, SegParams
from .pyscripts.parameters.validator import PipelineConfigValidator
from .pyscripts.types.errors import ConfigInvalid, PetGridError
from .pyscripts.types.log_level import LogLevel
from .pyscripts.utils.common_utils import set_package_log_level, setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

PHANTOM_DEFAULT_DIMS = (64, 64, 64)
PHANTOM_DEFAULT_SPACING = 3.0


def _dims(value: str) -> list[int]:
    try:
        dims = [int(part) for part in value.replace("x", ",").split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"dims must be three integers like 192,192,352, got {value!r}") from e
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise argparse.ArgumentTypeError(f"dims must be three positive integers, got {value!r}")
    return dims


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML, JSON or TOML config file layered over the shipped defaults")
    common.add_argument("--seed", type=int, help="Overrides perturb.rng_seed and fusion.seed")
    common.add_argument("--workers", type=int, help="Concurrent lesion workers")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    common.add_argument("--spacing", type=float, help="Working grid spacing in mm")
    common.add_argument("--dims", type=_dims, help="Working grid dims D,W,H")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="petgrid", description="Report-grounded PET/CT lesion toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="Extract lesion records from report text files")
    p.add_argument("--reports", required=True, help="Directory, comma list or glob of .txt reports")
    p.add_argument("--out", required=True, help="Output records.jsonl")
    p.add_argument("--pet-dir", help="Directory of PET sidecars carrying exam dates")

    p = sub.add_parser("segment", parents=[common], help="Segment the records of one PET exam")
    p.add_argument("--pet", required=True, help="PET NIfTI file; its stem is the exam id")
    p.add_argument("--records", required=True, help="records.jsonl from `petgrid parse`")
    p.add_argument("--out", required=True, help="Output directory for masks and seg_results.jsonl")
    p.add_argument("--params", help="File holding only the segmentation parameters")

    for name, help_text in (("crop", "Build the focal prompt for one lesion"), ("encode", "Encode one lesion")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--pet", required=True, help="PET NIfTI file")
        p.add_argument("--ct", help="CT NIfTI file; zeros are used when omitted")
        p.add_argument("--mask", required=True, help="Lesion mask NIfTI file")
        p.add_argument("--out", required=True, help="Output directory (crop) or token file (encode)")

    p = sub.add_parser("eval", parents=[common], help="Score generated findings against references")
    p.add_argument("--pred", required=True, help="Predictions JSONL ({id, text})")
    p.add_argument("--ref", required=True, help="References JSONL ({id, text, region?})")
    p.add_argument("--human", help="CSV with id,score columns")
    p.add_argument("--out", required=True, help="Output report.json")
    p.add_argument("--cider-length-penalty", action="store_true", help="Apply the Gaussian length penalty to CIDEr")

    p = sub.add_parser("pipeline", parents=[common], help="Run parse, segment, crop and encode end to end")
    p.add_argument("--input", help="Input tree with reports/, pet/ and optional ct/")
    p.add_argument("--output", help="Output directory")

    p = sub.add_parser("phantom", parents=[common], help="Write a synthetic input tree")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--blobs", type=int, help="Lesions per phantom (0-4, random when omitted)")
    p.add_argument("--count", type=int, default=1, help="Number of phantoms")
    p.add_argument("--noise", type=float, default=0.0, help="Std of additive PET noise")
    background = p.add_mutually_exclusive_group()
    background.add_argument("--background", dest="background", action="store_true", default=None)
    background.add_argument("--no-background", dest="background", action="store_false")
    return parser


def config_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested config overrides from the global flags."""
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["perturb"] = {"rng_seed": args.seed}
        overrides["fusion"] = {"seed": args.seed}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.verbose:
        overrides["log_level"] = LogLevel.DEBUG.value
    grid = {}
    if args.spacing is not None:
        grid["target_spacing"] = args.spacing
    if args.dims is not None:
        grid["target_dims"] = args.dims
    if grid:
        overrides["grid"] = grid
    if args.command == "pipeline":
        paths = {}
        if args.input:
            paths["input_dir"] = args.input
        if args.output:
            paths["output_dir"] = args.output
        if paths:
            overrides["paths"] = paths
    return overrides


def _dispatch(args: argparse.Namespace, config: PipelineConfig) -> int:
    command = args.command
    if command == "parse":
        run_parse(config, args.reports, args.out, pet_dir=args.pet_dir)
    elif command == "segment":
        if args.params:
            config.seg = ConfigLoader().load_section(args.params, SegParams, "seg")
            PipelineConfigValidator().validate_or_raise(config)
        run_segment(config, args.pet, args.records, args.out)
    elif command == "crop":
        run_crop(config, args.pet, args.ct, args.mask, args.out)
    elif command == "encode":
        run_encode(config, args.pet, args.ct, args.mask, args.out)
    elif command == "eval":
        run_eval(config, args.pred, args.ref, args.out, human=args.human, cider_length_penalty=args.cider_length_penalty)
    elif command == "pipeline":
        run_pipeline(config)
    return EXIT_OK


def _run_phantom(args: argparse.Namespace) -> int:
    run_phantom(
        args.out,
        seed=args.seed if args.seed is not None else 0,
        blobs=args.blobs,
        count=args.count,
        dims=tuple(args.dims) if args.dims else PHANTOM_DEFAULT_DIMS,
        spacing=args.spacing if args.spacing is not None else PHANTOM_DEFAULT_SPACING,
        with_background=args.background,
        noise_std=args.noise,
        log_level=LogLevel.for_verbose(args.verbose).numeric,
    )
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    set_package_log_level(LogLevel.for_verbose(args.verbose).numeric)
    try:
        if args.command == "phantom":
            return _run_phantom(args)
        config = load_pipeline_config(args.config, config_overrides(args))
        set_package_log_level(LogLevel(LogLevel.normalize(config.log_level)).numeric)
        return _dispatch(args, config)
    except ConfigInvalid as e:
        logger.error(str(e))
        return EXIT_ERROR
    except (PetGridError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
