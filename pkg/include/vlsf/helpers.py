"""
Helper functions shared by the bound, baseline and simulation modules.
"""
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)


def db_to_linear(snr_db: float) -> float:
    """
    Convert an SNR in dB to a linear power ratio. +inf dB maps to +inf.
    """
    return float(10.0 ** (snr_db / 10.0))


def validate_positive_int(value: int, name: str, operation_name: str = "operation") -> None:
    """
    Validate that a parameter is an integer >= 1.
    """
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        logger.error(f"Invalid {name} for {operation_name}: {value!r}")
        raise ValueError(f"{name} must be a positive integer for {operation_name}, got {value!r}")


def validate_positive(value: float, name: str, operation_name: str = "operation") -> None:
    """
    Validate that a parameter is a finite real > 0.
    """
    if not np.isfinite(value) or value <= 0:
        logger.error(f"Invalid {name} for {operation_name}: {value!r}")
        raise ValueError(f"{name} must be a finite positive number for {operation_name}, got {value!r}")


def validate_probability(value: float, name: str, operation_name: str = "operation") -> None:
    """
    Validate that a value lies in [0, 1].
    """
    if not (0.0 <= value <= 1.0):
        logger.error(f"Invalid probability {name} for {operation_name}: {value!r}")
        raise ValueError(f"{name} must lie in [0, 1] for {operation_name}, got {value!r}")


def validate_feedback_pair(eps_s2c: float, eps_c2s: float, operation_name: str = "operation") -> None:
    """
    Validate an (eps_s2c, eps_c2s) pair, including eps_s2c + eps_c2s <= 1.
    """
    validate_probability(eps_s2c, "eps_s2c", operation_name)
    validate_probability(eps_c2s, "eps_c2s", operation_name)
    if eps_s2c + eps_c2s > 1.0 + 1e-12:
        logger.error(f"Feedback pair ({eps_s2c}, {eps_c2s}) violates eps_s2c + eps_c2s <= 1 in {operation_name}")
        raise ValueError(
            f"eps_s2c + eps_c2s must not exceed 1 for {operation_name}, got {eps_s2c} + {eps_c2s}"
        )


def log_m_minus_one(m_log2: float) -> float:
    """
    log(M - 1) in nats for M = 2**m_log2, without forming M. Returns -inf for M = 1.
    """
    if m_log2 < 0:
        raise ValueError(f"m_log2 must be nonnegative, got {m_log2}")
    x = m_log2 * LOG2
    if x == 0.0:
        return -math.inf
    if x < 1.0:
        return math.log(math.expm1(x))
    return x + math.log1p(-math.exp(-x))


def wilson_interval(successes: np.ndarray, trials: int, z: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Wilson score interval for binomial proportions. Returns (lower, upper) arrays.
    """
    successes = np.asarray(successes, dtype=float)
    p_hat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2.0 * trials)) / denom
    half = z * np.sqrt(p_hat * (1.0 - p_hat) / trials + z2 / (4.0 * trials * trials)) / denom
    lower = np.clip(center - half, 0.0, 1.0)
    upper = np.clip(center + half, 0.0, 1.0)
    return lower, upper


def mean_interval(total: np.ndarray, total_sq: np.ndarray, trials: int, z: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample mean and CLT half-width from running sums of x and x**2.
    """
    total = np.asarray(total, dtype=float)
    mean = total / trials
    if trials < 2:
        return mean, np.full_like(mean, np.inf)
    var = np.maximum(np.asarray(total_sq, dtype=float) / trials - mean * mean, 0.0) * trials / (trials - 1)
    return mean, z * np.sqrt(var / trials)


def divisors_in_range(total: int, low: int, high: int) -> List[int]:
    """
    Divisors d of total with low <= d <= high, ascending.
    """
    validate_positive_int(total, "total", "divisor enumeration")
    return [d for d in range(max(1, low), min(total, high) + 1) if total % d == 0]


def running_minimum(values: Sequence[float]) -> np.ndarray:
    """
    Running minimum of a sequence; NaN entries are carried as +inf.
    """
    arr = np.asarray(values, dtype=float)
    arr = np.where(np.isnan(arr), np.inf, arr)
    return np.minimum.accumulate(arr) if arr.size else arr


def validate_required_columns(df: pd.DataFrame, required_cols: List[str],
                              operation_name: str = "operation") -> None:
    """
    Validate that all required columns are present in the DataFrame.
    """
    missing = [col for col in required_cols if col not in df.columns]
    if missing:
        logger.error(f"Missing required columns for {operation_name}: {missing}")
        raise ValueError(f"Missing required columns for {operation_name}: {missing}")


def log_frame_info(df: pd.DataFrame, operation_name: str,
                   show_preview: bool = True, preview_rows: int = 3) -> None:
    """
    Log shape and a short preview of a result table.
    """
    logger.info(f"{operation_name} - Shape: {df.shape}")

    if show_preview and len(df) > 0:
        logger.info(f"{operation_name} - Preview:\n{df.head(preview_rows).to_string(index=False)}")
