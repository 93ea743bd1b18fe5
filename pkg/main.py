"""
echoseg command-line entry points.

``echoseg`` takes a subcommand; ``echoseg-generate-shards``, ``echoseg-train`` and
``echoseg-infer`` run one subcommand each.
"""

import sys
from typing import Callable, Optional, Sequence

from cli.parser import dispatch


def main(argv: Optional[Sequence[str]] = None) -> int:
    return dispatch(argv)


def command_entry(command: str) -> Callable[[Optional[Sequence[str]]], int]:
    """Entry point running ``echoseg <command>`` with the remaining arguments."""

    def entry(argv: Optional[Sequence[str]] = None) -> int:
        args = sys.argv[1:] if argv is None else list(argv)
        return dispatch([command, *args])

    return entry


generate_shards_main = command_entry("generate-shards")
train_main = command_entry("train")
infer_main = command_entry("infer")


if __name__ == "__main__":
    sys.exit(main())
