"""Shared fixtures: bundled sample data and published reference values."""

from __future__ import annotations

import numpy as np
import pytest

from ratingsde import CohortMatrix, SdeParams
from ratingsde import datasets

# Printed reference values for the sample data set (4 decimal digits of the
# published tables; tolerance 5e-5 covers print rounding).
DISTANCE_PUBLISHED = np.array([
    [0.0945, 0.0013, 2.5123e-04, 6.5335e-04],
    [6.9289e-04, 0.1892, 6.1092e-04, 0.0042],
    [4.5115e-04, 0.0067, 0.0849, 0.0283],
    [0.0, 0.0, 0.0, 0.0],
])

ADJUSTED_PUBLISHED = np.array([
    [0.9624, 0.0329, 3.4924e-04, 2.8275e-05],
    [0.0065, 0.9610, 0.0199, 0.0019],
    [8.3277e-06, 0.0072, 0.7773, 0.1621],
    [0.0, 0.0, 0.0, 1.0],
])

PRINT_TOL = 5e-5


@pytest.fixture(scope="session")
def cohort() -> CohortMatrix:
    return CohortMatrix(k=4, entries=datasets.cohort_1y())


@pytest.fixture(scope="session")
def reconstructed() -> np.ndarray:
    return datasets.reconstructed_1y()


@pytest.fixture(scope="session")
def calibrated_params() -> SdeParams:
    _, a, b, sigma = datasets.calibrated_params_1y()
    return SdeParams(k=4, a=a, b=b, sigma=sigma)
