"""
Baseline Command
Runs the classical line pickers on Sv exports
"""

import argparse
import logging

from cli.common import add_jobs_and_seed, add_orientation, output_dir_for, resolve_inputs
from config.settings import Settings
from constants.defaults import LAYER_MEDIAN_DB, THRESHOLD_OFFSET_MIN_DB
from models.baseline import BaselineConfig
from models.echogram import Orientation
from services.baseline import baseline_csv
from utils.parallel import map_jobs

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "baseline",
        help="Pick lines with the threshold-offset and best-bottom-candidate baselines",
        description="Write <name>.<kind>.<algorithm>.evl for every applicable classical picker.",
    )
    parser.add_argument("inputs", nargs="+", help="Sv CSV files or corpus directories")
    parser.add_argument("--output-dir", help="Write lines here instead of beside each input")
    add_orientation(parser)
    parser.add_argument(
        "--min-db", type=float, default=THRESHOLD_OFFSET_MIN_DB,
        help="Threshold-offset minimum (default: %(default)s dB)",
    )
    parser.add_argument("--blur-wrap", action="store_true", help="Wrap the blur around the borders")
    parser.add_argument(
        "--layer-db", type=float, default=LAYER_MEDIAN_DB,
        help="Minimum median Sv of a seafloor or surface layer (default: %(default)s dB)",
    )
    add_jobs_and_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = BaselineConfig(min_db=args.min_db, blur_wrap=args.blur_wrap, layer_db=args.layer_db)
    orientation = Orientation(args.orientation)
    inputs = resolve_inputs(args.inputs)
    map_jobs(
        lambda path: baseline_csv(path, output_dir_for(path, args.output_dir), orientation, config),
        inputs,
        args.jobs,
    )
    return 0
