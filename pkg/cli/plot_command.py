"""
Plot Command
Renders echogram overlays and error distributions as PNG files
"""

import argparse
import logging
from pathlib import Path

from cli.common import add_jobs_and_seed, add_orientation
from config.settings import Settings
from models.echogram import Orientation
from services.formats.evl import read_evl
from services.formats.evr import read_evr
from services.formats.sv_csv import read_sv_csv
from services.metrics import read_report
from services.preprocessing import line_on_grid, regions_on_grid, regrid_depth, standardize_orientation
from utils.plotting import plot_echogram, plot_error_cdf

logger = logging.getLogger(__name__)

LINE_KINDS = ("air", "seafloor", "surface")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("plot", help="Plot echograms or error distributions")
    kinds = parser.add_subparsers(dest="plot_kind", required=True)

    echogram = kinds.add_parser("echogram", help="Echogram with line and region overlays")
    echogram.add_argument("csv", help="Sv CSV export")
    echogram.add_argument("--lines", nargs="*", default=[], help="EVL files to overlay")
    echogram.add_argument("--regions", help="EVR file to overlay")
    echogram.add_argument("--output", required=True, help="PNG path")
    add_orientation(echogram)
    add_jobs_and_seed(echogram)
    echogram.set_defaults(handler=run_echogram)

    cdf = kinds.add_parser("cdf", help="Cumulative error distribution of evaluation reports")
    cdf.add_argument("reports", nargs="+", help="Report paths written by evaluate (any suffix)")
    cdf.add_argument("--line", choices=LINE_KINDS, default="air", help="Line to plot")
    cdf.add_argument("--output", required=True, help="PNG path")
    add_jobs_and_seed(cdf)
    cdf.set_defaults(handler=run_cdf)


def _line_kind(path: Path) -> str:
    """Kind named in ``<name>.<kind>[.<tag>].evl``."""
    parts = path.name.split(".")
    return next((part for part in parts[1:] if part in LINE_KINDS), path.stem)


def run_echogram(args: argparse.Namespace, settings: Settings) -> int:
    echogram = standardize_orientation(regrid_depth(read_sv_csv(args.csv), Orientation(args.orientation)))
    lines = {}
    for item in args.lines:
        path = Path(item)
        kind = _line_kind(path)
        lines[f"{kind}: {path.name}"] = line_on_grid(read_evl(path), echogram, kind)
    regions = regions_on_grid(read_evr(args.regions), echogram) if args.regions else None
    plot_echogram(echogram, args.output, lines, regions, title=Path(args.csv).name)
    return 0


def run_cdf(args: argparse.Namespace, settings: Settings) -> int:
    curves = {}
    for item in args.reports:
        report = read_report(item)
        if args.line in report.lines:
            curves[Path(item).stem] = report.lines[args.line].cdf
        else:
            logger.warning(f"{item} has no {args.line} line statistics")
    plot_error_cdf(curves, args.output, title=f"{args.line} line error")
    return 0
