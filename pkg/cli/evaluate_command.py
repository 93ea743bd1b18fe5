"""
Evaluate Command
Scores tagged annotations against a corpus and writes a metrics report
"""

import argparse
import logging
from pathlib import Path

from cli.common import add_jobs_and_seed, add_orientation
from config.settings import Settings
from constants.defaults import LINE_OFFSET_M
from models.echogram import Orientation
from models.evaluation import DatasetMode
from services.formats.corpus import REPORT_PREFIX
from services.metrics import evaluate_corpus, format_report, per_file_frame, write_report

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "evaluate",
        help="Compare annotations with the corpus targets",
        description="Report IoU, line MAE/RMSE and within-threshold fractions with standard errors.",
    )
    parser.add_argument("targets", help="Corpus directory with exports and target lines")
    parser.add_argument(
        "predictions", nargs="?", help="Directory with predicted files (default: the corpus directory)"
    )
    parser.add_argument("--tag", help="Model or algorithm tag of the predicted files (omit for untagged)")
    add_orientation(parser)
    parser.add_argument(
        "--mode", choices=[m.value for m in DatasetMode], default=DatasetMode.POOLED.value,
        help="Pool counts over recordings or average per recording (default: %(default)s)",
    )
    parser.add_argument(
        "--line-offset", type=float,
        help=f"Offset applied to the predicted lines (default: {LINE_OFFSET_M} m for model tags, 0 otherwise)",
    )
    parser.add_argument(
        "--surface-range", type=float, nargs=2, metavar=("LO", "HI"),
        help="Only score surface lines whose target lies within this depth range (m)",
    )
    parser.add_argument("--report", help="Report path without suffix (default: <predictions>/report-<tag>)")
    parser.add_argument("--per-file", action="store_true", help="Also write per-recording statistics")
    add_jobs_and_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    predictions = Path(args.predictions or args.targets)
    report, files = evaluate_corpus(
        args.targets,
        predictions,
        tag=args.tag,
        orientation=Orientation(args.orientation),
        mode=DatasetMode(args.mode),
        line_offset=args.line_offset,
        surface_range=tuple(args.surface_range) if args.surface_range else None,
        jobs=args.jobs,
    )
    report_path = Path(args.report) if args.report else predictions / f"{REPORT_PREFIX}{args.tag or 'targets'}"
    write_report(report, report_path)
    if args.per_file:
        per_file_frame(files).to_csv(report_path.with_name(report_path.name + "-files.csv"), index=False)
    print(format_report(report), end="")
    return 0
