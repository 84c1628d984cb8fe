"""Session-scoped artifacts shared by the integration and acceptance tests:
solved value grids and trained estimators (deterministic given their seeds).
Build times ride along so runtime budgets can be asserted honestly."""

import time

import pytest

from reachsafe.harness import (
    solve_default_grid,
    train_landmark_estimator,
    train_taxi_estimator,
)
from reachsafe.systems import DoubleIntParams, LANDMARK_LAYOUTS


@pytest.fixture(scope="session")
def scalar_grid_s():
    return solve_default_grid("scalar")


@pytest.fixture(scope="session")
def taxi_grid_s():
    return solve_default_grid("taxi")


@pytest.fixture(scope="session")
def di_grid_s():
    return solve_default_grid("di-axis")


@pytest.fixture(scope="session")
def taxi_estimator_s():
    return train_taxi_estimator(epochs=60)


@pytest.fixture(scope="session")
def landmark_estimators_s():
    out = {}
    start = time.perf_counter()
    for layout in ("square", "triangular"):
        params = DoubleIntParams(landmarks=LANDMARK_LAYOUTS[layout].copy())
        out[layout] = train_landmark_estimator(params, seed=0)
    out["train_seconds"] = time.perf_counter() - start
    return out
