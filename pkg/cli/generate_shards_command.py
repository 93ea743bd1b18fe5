"""
Generate Shards Command
Preprocesses a corpus of exports and annotated lines into shard stores
"""

import argparse
import logging
from pathlib import Path

from cli.common import add_jobs_and_seed, add_orientation
from config.settings import Settings
from constants.defaults import SHARD_LENGTH
from constants.messages import SuccessMessages
from models.echogram import Orientation
from models.formats import RecordingPaths
from services.formats.corpus import find_recordings
from services.formats.shards import write_shards
from services.preprocessing import load_corpus_recording
from utils.parallel import map_jobs

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "generate-shards",
        aliases=["shards"],
        help="Preprocess a corpus into training shards",
        description="Regrid, standardise and split every recording of a corpus into 128-ping shards.",
    )
    parser.add_argument("corpus", help="Directory of <name>.csv exports with <name>.<kind>.evl lines")
    parser.add_argument("output", help="Directory receiving one shard store per recording")
    add_orientation(parser)
    parser.add_argument("--shard-length", type=int, default=SHARD_LENGTH, help="Pings per shard")
    parser.add_argument(
        "--line-offset", type=float, default=0.0, help="Offset already applied to the exported lines (m)"
    )
    add_jobs_and_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    recordings = find_recordings(args.corpus, Orientation(args.orientation))
    output = Path(args.output)

    def shard(paths: RecordingPaths) -> int:
        echogram, targets = load_corpus_recording(paths, line_offset=args.line_offset)
        manifest = write_shards(
            echogram, targets, output / paths.name, source_id=paths.name, shard_length=args.shard_length
        )
        return manifest.n_shards

    counts = map_jobs(shard, recordings, args.jobs)
    logger.info(SuccessMessages.SHARDS_WRITTEN.format(count=sum(counts), directory=output))
    return 0
