"""
Synth Command
Writes a corpus of synthetic recordings with exact annotations
"""

import argparse
import logging

from cli.common import add_jobs_and_seed, add_orientation
from config.settings import Settings
from models.echogram import Orientation
from models.synth import SynthConfig
from services.synth import generate_corpus

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "synth",
        help="Generate synthetic recordings",
        description="Write raw/clean Sv CSV exports, EVL lines and EVR regions with exact ground truth.",
    )
    parser.add_argument("output", help="Corpus directory")
    parser.add_argument("--count", type=int, default=1, help="Number of recordings")
    parser.add_argument("--prefix", default="synth", help="Recording name prefix")
    add_orientation(parser)
    parser.add_argument("--n-pings", type=int, default=512)
    parser.add_argument("--depth-max", type=float, default=50.0, help="Deepest sample (m)")
    parser.add_argument("--resolution", type=float, default=0.1, help="Depth step (m)")
    parser.add_argument("--air-base", type=float, default=0.3, help="Mean air penetration (fraction)")
    parser.add_argument("--air-amplitude", type=float, default=0.1, help="Tidal air amplitude (fraction)")
    parser.add_argument("--empty-range", type=float, default=0.0, help="Share of range outside the water")
    parser.add_argument("--passive-rate", type=float, default=0.0, help="Passive periods per 1000 pings")
    parser.add_argument("--bad-period-rate", type=float, default=0.0, help="Bad periods per 1000 pings")
    parser.add_argument("--patch-rate", type=float, default=0.0, help="Bad patches per 1000 pings")
    add_jobs_and_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = SynthConfig(
        seed=args.seed,
        orientation=Orientation(args.orientation),
        n_pings=args.n_pings,
        depth_max=args.depth_max,
        resolution=args.resolution,
        air_base=args.air_base,
        air_amplitude=args.air_amplitude,
        empty_range_fraction=args.empty_range,
        passive_rate=args.passive_rate,
        bad_period_rate=args.bad_period_rate,
        patch_rate=args.patch_rate,
    )
    generate_corpus(config, args.count, args.output, prefix=args.prefix, jobs=args.jobs)
    return 0
