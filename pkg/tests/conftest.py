"""Shared fixtures: reference plans, parameters and random instances."""

import numpy as np
import pytest

from psaltfit import GroupPlan, ModelParams, TestPlan


@pytest.fixture
def theta0():
    return ModelParams(1.6, 1.1, 2.7)


@pytest.fixture
def bench_plan():
    """Three-group benchmark plan used throughout the simulation studies."""
    return TestPlan(
        [
            GroupPlan(20, 3.0, np.array([0.4, 0.5, 0.7])),
            GroupPlan(25, 8.0, np.array([0.2, 0.4, 0.8])),
            GroupPlan(30, 10.0, np.array([0.2, 0.3, 0.5])),
        ]
    )


@pytest.fixture
def small_plan():
    """Two groups with two inspections each: 3 cells per group, cheap to
    enumerate exhaustively."""
    return TestPlan(
        [
            GroupPlan(8, 3.0, np.array([0.3, 0.6])),
            GroupPlan(10, 6.0, np.array([0.2, 0.5])),
        ]
    )


def random_instance(rng):
    """A random (theta, plan) pair with moderate, well-conditioned cells."""
    theta = ModelParams(
        a=float(rng.uniform(0.5, 3.0)),
        b=float(rng.uniform(0.3, 2.0)),
        mu=float(rng.uniform(0.8, 4.0)),
    )
    groups = []
    for _ in range(rng.integers(1, 4)):
        n_tau = int(rng.integers(2, 5))
        tau = np.sort(rng.uniform(0.1, 1.2, size=n_tau))
        groups.append(
            GroupPlan(
                n_units=int(rng.integers(5, 60)),
                stress_rate=float(rng.uniform(1.0, 12.0)),
                inspection_times=tau,
            )
        )
    return theta, TestPlan(groups)
