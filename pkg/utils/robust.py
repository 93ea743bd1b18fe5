"""
Robust statistics used by preprocessing, normalization and inference.

Quantiles use numpy's default linear interpolation (Hyndman-Fan type 7).
"""

import numpy as np
import pandas as pd

from constants.defaults import IDR_TO_SIGMA, IQR_TO_SIGMA


def iqr(values: np.ndarray) -> float:
    """Interquartile range of the finite entries of ``values``."""
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return float("nan")
    q25, q75 = np.percentile(values, [25, 75])
    return float(q75 - q25)


def idr(values: np.ndarray) -> float:
    """Interdecile range (90th minus 10th percentile) of the finite entries."""
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return float("nan")
    q10, q90 = np.percentile(values, [10, 90])
    return float(q90 - q10)


def sigma_from_iqr(values: np.ndarray) -> float:
    """Standard deviation estimated as iqr / 1.35."""
    return iqr(values) / IQR_TO_SIGMA


def sigma_from_idr(values: np.ndarray) -> float:
    """Standard deviation estimated as idr / 2.56."""
    return idr(values) / IDR_TO_SIGMA


def rolling_median(values: np.ndarray, kernel: int) -> np.ndarray:
    """
    Centred running median with windows truncated at the sequence edges.

    Args:
        values: 1-D sequence
        kernel: Window length (odd)

    Returns:
        Array of the same length as ``values``
    """
    series = pd.Series(np.asarray(values, dtype=float))
    return series.rolling(window=kernel, center=True, min_periods=1).median().to_numpy()


def flag_outliers(residuals: np.ndarray, sigma: float, n_sigma: float) -> np.ndarray:
    """
    Flag residuals further than ``n_sigma * sigma`` from zero.

    Constant residuals flag nothing. A zero sigma with non-constant residuals
    flags every non-zero residual.
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size == 0 or np.ptp(residuals) == 0:
        return np.zeros(residuals.shape, dtype=bool)
    if not np.isfinite(sigma):
        return np.zeros(residuals.shape, dtype=bool)
    return np.abs(residuals) > n_sigma * sigma
