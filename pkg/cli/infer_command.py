"""
Infer Command
Annotates Sv exports with a trained network, writing EVL lines and EVR regions
"""

import argparse
import logging

from cli.common import add_jobs_and_seed, add_orientation, output_dir_for, resolve_inputs
from config.settings import Settings
from constants.defaults import AUTOZOOM_THRESHOLD, LINE_OFFSET_M
from constants.messages import ErrorMessages
from core.exceptions import UsageError
from models.echogram import Orientation
from models.inference import InferenceConfig
from services.inference import annotate_csv, load_model
from utils.parallel import map_jobs

logger = logging.getLogger(__name__)

# Above any cropped fraction, so the second pass never runs
NO_AUTOZOOM = 1.0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "infer",
        aliases=["annotate"],
        help="Annotate Sv CSV exports with a trained model",
        description="Predict entrained-air, seafloor and surface lines and bad-data regions.",
    )
    parser.add_argument("inputs", nargs="+", help="Sv CSV files or corpus directories")
    parser.add_argument("--model", help="Checkpoint directory (default: ECHOSEG_MODEL_PATH)")
    parser.add_argument("--output-dir", help="Write annotations here instead of beside each input")
    add_orientation(parser)
    zoom = parser.add_mutually_exclusive_group()
    zoom.add_argument(
        "--autozoom-threshold", type=float, default=AUTOZOOM_THRESHOLD,
        help="Cropped fraction above which a zoomed second pass runs; 0 always zooms (default: %(default)s)",
    )
    zoom.add_argument("--no-autozoom", action="store_true", help="Never run the second pass")
    parser.add_argument(
        "--line-offset", type=float, default=LINE_OFFSET_M, help="Offset applied to exported lines (m)"
    )
    parser.add_argument("--smoothing-sigma", type=float, default=0.0, help="Gaussian smoothing of logits")
    parser.add_argument("--drop-bad-data", action="store_true", help="Discard bad-data periods and patches")
    parser.add_argument(
        "--unconditioned", action="store_true", help="Use the orientation-agnostic outputs"
    )
    add_jobs_and_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    model_path = args.model or settings.model_path
    if not model_path:
        raise UsageError(ErrorMessages.NO_MODEL)

    config = InferenceConfig(
        autozoom_threshold=NO_AUTOZOOM if args.no_autozoom else args.autozoom_threshold,
        line_offset=args.line_offset,
        smoothing_sigma=args.smoothing_sigma,
        drop_bad_data=args.drop_bad_data,
        conditioned=not args.unconditioned,
    )
    inputs = resolve_inputs(args.inputs)
    model, manifest = load_model(model_path)
    orientation = Orientation(args.orientation)
    logger.info(f"Annotating {len(inputs)} recordings with {manifest.model_id}")

    map_jobs(
        lambda path: annotate_csv(
            path, model, output_dir_for(path, args.output_dir), orientation, config, manifest.model_id
        ),
        inputs,
        args.jobs,
    )
    return 0
