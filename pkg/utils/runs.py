"""Helpers for runs of consecutive pings."""

from typing import Iterable

import numpy as np


def find_runs(flags: np.ndarray) -> list[tuple[int, int]]:
    """
    Return inclusive ``(start, stop)`` index pairs of every run of True values.

    Example:
        >>> find_runs(np.array([0, 1, 1, 0, 1], dtype=bool))
        [(1, 2), (4, 4)]
    """
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        return []
    padded = np.concatenate(([False], flags, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return [(int(start), int(stop) - 1) for start, stop in zip(edges[::2], edges[1::2])]


def runs_to_flags(intervals: Iterable[tuple[int, int]], length: int) -> np.ndarray:
    """Inverse of :func:`find_runs` for a sequence of ``length`` pings."""
    flags = np.zeros(length, dtype=bool)
    for start, stop in intervals:
        flags[max(start, 0):min(stop, length - 1) + 1] = True
    return flags
