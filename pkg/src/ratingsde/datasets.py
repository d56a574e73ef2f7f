"""Bundled sample data: a four-rating corporate data set used in tests and demos."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from . import matio

RATING_LABELS = ["A", "B", "C", "D"]


def data_path(name: str) -> Path:
    return Path(resources.files("ratingsde") / "data" / name)


def load_matrix(name: str) -> np.ndarray:
    _, entries = matio.read_rating_csv(data_path(name))
    return entries


def annual_example() -> np.ndarray:
    """A published-style one-year rating transition matrix."""
    return load_matrix("annual_example.csv")


def groundtruth_1y() -> np.ndarray:
    """One-year matrix without withdrawals (full-information estimate)."""
    return load_matrix("groundtruth_1y.csv")


def cohort_1y() -> np.ndarray:
    """One-year cohort matrix with withdrawal mass (row sums < 1)."""
    return load_matrix("cohort_1y.csv")


def reconstructed_1y() -> np.ndarray:
    """Repaired one-year matrix (row sums = 1)."""
    return load_matrix("reconstructed_1y.csv")


def pd_scenario(case: int) -> np.ndarray:
    """One-year default-probability targets per starting rating, scenario 1-3."""
    _, pds = matio.read_pd_csv(data_path(f"pd_case{case}.csv"))
    return pds


def calibrated_params_1y():
    """Historically calibrated SDE parameters for the sample data set.

    Returns (coordinate labels, a, b, sigma) in canonical coordinate order.
    """
    return matio.read_params_csv(data_path("calibrated_params_1y.csv"))
