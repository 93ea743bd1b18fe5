"""
Pydantic models for evaluation statistics and reports
"""

from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from models.echogram import ArrayModel


class DatasetMode(str, Enum):
    """How per-file statistics are combined."""

    POOLED = "pooled"
    PER_FILE = "per-file"


class FileStats(ArrayModel):
    """Raw counts and errors for one evaluated recording."""

    name: str = Field(..., description="Recording identifier")
    intersections: dict[str, int] = Field(default_factory=dict, description="Per-output |A and B|")
    unions: dict[str, int] = Field(default_factory=dict, description="Per-output |A or B|")
    target_sizes: dict[str, int] = Field(default_factory=dict, description="Per-output |target|")
    line_errors: dict[str, np.ndarray] = Field(
        default_factory=dict, description="Absolute line errors (m) of the included pings"
    )

    def iou(self, output: str) -> Optional[float]:
        union = self.unions.get(output, 0)
        if union == 0:
            return None
        return self.intersections[output] / union


class Statistic(BaseModel):
    """An aggregated value with its standard error."""

    value: Optional[float] = Field(None, description="Aggregated value (None if undefined)")
    sem: Optional[float] = Field(None, description="Standard error over files (None if undefined)")


class LineSummary(BaseModel):
    """Aggregated line-error statistics."""

    mae: Statistic
    rmse: Statistic
    within: dict[float, Statistic] = Field(
        default_factory=dict, description="Fraction of pings with |error| <= threshold"
    )
    cdf: list[tuple[float, float]] = Field(
        default_factory=list, description="(error, fraction of pings at or below it)"
    )
    n_pings: int = 0


class MetricsReport(BaseModel):
    """Evaluation report over a set of recordings."""

    mode: DatasetMode
    n_files: int
    iou: dict[str, Statistic] = Field(default_factory=dict, description="Overall and per-output IoU")
    lines: dict[str, LineSummary] = Field(default_factory=dict)
    both_empty: dict[str, int] = Field(
        default_factory=dict, description="Files where target and prediction were both empty"
    )

    def to_frame(self) -> pd.DataFrame:
        """One row per statistic with value and SEM columns."""
        rows = []
        for output, stat in self.iou.items():
            rows.append({"statistic": f"IoU ({output})", "value": stat.value, "sem": stat.sem})
        for line, summary in self.lines.items():
            rows.append({"statistic": f"{line} MAE (m)", "value": summary.mae.value, "sem": summary.mae.sem})
            rows.append({"statistic": f"{line} RMSE (m)", "value": summary.rmse.value, "sem": summary.rmse.sem})
            for threshold, stat in summary.within.items():
                rows.append(
                    {"statistic": f"{line} within {threshold:g} m", "value": stat.value, "sem": stat.sem}
                )
        return pd.DataFrame(rows, columns=["statistic", "value", "sem"])


class LineErrorStats(ArrayModel):
    """Line errors of one recording over its included pings."""

    errors: np.ndarray = Field(..., description="Absolute errors of the included pings (m)")
    mae: float
    rmse: float
    within: dict[float, float] = Field(default_factory=dict)

    @property
    def n_pings(self) -> int:
        return len(self.errors)


class PairedTest(BaseModel):
    """Two-sided Wilcoxon signed-rank test on paired per-file statistics."""

    statistic: float
    p_value: float
    n_pairs: int
    median_difference: float = Field(..., description="Median of a - b")

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha
