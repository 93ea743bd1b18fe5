"""
Shared numerical helpers
"""

from utils.parallel import map_jobs
from utils.robust import flag_outliers, idr, iqr, rolling_median, sigma_from_idr, sigma_from_iqr
from utils.runs import find_runs, runs_to_flags

__all__ = [
    "map_jobs",
    "flag_outliers",
    "idr",
    "iqr",
    "rolling_median",
    "sigma_from_idr",
    "sigma_from_iqr",
    "find_runs",
    "runs_to_flags",
]
