"""Bundled miniature light-bulb ramp-voltage dataset.

Two stress groups (62 and 61 bulbs) with stress rates 0.201 and 0.2015 and
failure times on a rescaled axis; inspections at (0.37, 0.67, 0.75) and
(0.37, 0.44, 0.54) respectively.
"""

from __future__ import annotations

import csv
from importlib import resources

import numpy as np

from .divergence import ObservedCounts
from .model import GroupPlan, TestPlan

__all__ = ["lightbulb_lifetimes", "lightbulb_plan", "load_lightbulbs", "read_lifetimes_csv"]

LIGHTBULB_STRESS_RATES = (0.201, 0.2015)
LIGHTBULB_INSPECTIONS = ((0.37, 0.67, 0.75), (0.37, 0.44, 0.54))


def read_lifetimes_csv(fh) -> dict:
    """Parse group,failure_time rows into per-group time arrays."""
    times: dict = {}
    for row in csv.DictReader(fh):
        times.setdefault(int(row["group"]), []).append(float(row["failure_time"]))
    return {g: np.asarray(t) for g, t in times.items()}


def lightbulb_lifetimes() -> list:
    with resources.files("psaltfit.data").joinpath("lightbulbs.csv").open() as fh:
        times = read_lifetimes_csv(fh)
    return [times[g] for g in sorted(times)]


def lightbulb_plan() -> TestPlan:
    lifetimes = lightbulb_lifetimes()
    return TestPlan(
        [
            GroupPlan(n_units=len(t), stress_rate=nu, inspection_times=np.asarray(tau))
            for t, nu, tau in zip(
                lifetimes, LIGHTBULB_STRESS_RATES, LIGHTBULB_INSPECTIONS
            )
        ]
    )


def load_lightbulbs():
    """Return (plan, counts) for the bundled dataset."""
    plan = lightbulb_plan()
    counts = ObservedCounts.from_lifetimes(plan, lightbulb_lifetimes())
    return plan, counts
