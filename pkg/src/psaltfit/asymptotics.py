"""Sandwich asymptotic covariance, Wald intervals and influence diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .divergence import FitResult, TuningParams, _cell_weight
from .model import PROB_FLOOR, ModelParams, TestPlan, cell_gradients, cell_probabilities

__all__ = [
    "SandwichMatrices",
    "OutlierPoint",
    "SingularMatrixError",
    "j_matrix",
    "k_matrix",
    "asym_covariance",
    "confidence_intervals",
    "influence_function",
    "outlier_lattice",
]


class SingularMatrixError(np.linalg.LinAlgError):
    """The bread matrix is numerically singular."""


@dataclass(frozen=True)
class SandwichMatrices:
    j_mat: np.ndarray
    k_mat: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class OutlierPoint:
    """One-hot cell indicator for a single group, length J_i + 1."""

    indicator: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.indicator, dtype=float)
        object.__setattr__(self, "indicator", t)
        if not (np.all((t == 0) | (t == 1)) and t.sum() == 1):
            raise ValueError("indicator must be one-hot")


def j_matrix(
    theta: ModelParams,
    plan: TestPlan,
    tuning: TuningParams,
    floor: float = PROB_FLOOR,
) -> np.ndarray:
    """Bread matrix: sum over cells of w(p) * (dp)(dp)^T."""
    cells = cell_probabilities(theta, plan)
    grads = cell_gradients(theta, plan)
    j = np.zeros((3, 3))
    for p, d in zip(cells, grads):
        w = _cell_weight(p, tuning, floor)
        j += (d * w[:, None]).T @ d
    return j


def k_matrix(
    theta: ModelParams,
    plan: TestPlan,
    tuning: TuningParams,
    floor: float = PROB_FLOOR,
    weighting: str = "literal",
) -> np.ndarray:
    """Meat matrix: per-group single-draw covariance of the score, summed.

    For one multinomial draw with cell indicator X the per-draw score is
    -sum_j w_j X_j dp_j plus a deterministic part, so its covariance is
    sum_j w_j^2 p_j dp_j dp_j^T - m m^T with m = sum_j w_j p_j dp_j.

    ``weighting="literal"`` sums the per-group covariances as derived;
    ``"proportional"`` scales each by N / N_i for unequal allocations.
    """
    if weighting not in ("literal", "proportional"):
        raise ValueError(f"unknown weighting {weighting!r}")
    cells = cell_probabilities(theta, plan)
    grads = cell_gradients(theta, plan)
    n_total = plan.n_total
    k = np.zeros((3, 3))
    for g, p, d in zip(plan, cells, grads):
        w = _cell_weight(p, tuning, floor)
        wd = w[:, None] * d
        m = (w * p) @ d
        k_i = (wd * p[:, None]).T @ wd - np.outer(m, m)
        if weighting == "proportional":
            k_i = k_i * (n_total / g.n_units)
        k += k_i
    return k


def _inverse_spd(mat: np.ndarray, floor_scale: float = 1e-12) -> np.ndarray:
    """Symmetric-eigendecomposition inverse; raises when near-singular."""
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    floor = floor_scale * np.trace(sym)
    if vals.min() <= floor:
        cond = np.inf if vals.min() <= 0 else vals.max() / vals.min()
        raise SingularMatrixError(
            f"matrix is numerically singular (condition number {cond:.3e})"
        )
    return (vecs / vals) @ vecs.T


def asym_covariance(
    theta: ModelParams,
    plan: TestPlan,
    tuning: TuningParams,
    n_total: int | None = None,
    floor: float = PROB_FLOOR,
    weighting: str = "literal",
) -> SandwichMatrices:
    """J^-1 K J^-1 / N with N the total number of devices on test."""
    if n_total is None:
        n_total = plan.n_total
    if n_total < 1:
        raise ValueError("n_total must be positive")
    j = j_matrix(theta, plan, tuning, floor)
    k = k_matrix(theta, plan, tuning, floor, weighting)
    j_inv = _inverse_spd(j)
    cov = j_inv @ k @ j_inv / n_total
    return SandwichMatrices(j_mat=j, k_mat=k, cov=cov)


def confidence_intervals(fit: FitResult, cov: np.ndarray, level: float = 0.95):
    """Per-parameter Wald intervals theta_hat +- z * sqrt(diag(cov))."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    var = np.diag(np.asarray(cov, dtype=float))
    if np.any(var < 0):
        raise ValueError("negative variance in covariance diagonal")
    z = norm.ppf(0.5 * (1.0 + level))
    theta = fit.theta_hat.as_array()
    half = z * np.sqrt(var)
    return [(lo, hi) for lo, hi in zip(theta - half, theta + half)]


def influence_function(
    outliers,
    theta: ModelParams,
    plan: TestPlan,
    tuning: TuningParams,
    floor: float = PROB_FLOOR,
) -> np.ndarray:
    """First-order effect of point contamination at one cell per group.

    ``outliers`` holds one OutlierPoint per group.  Returns
    J^-1 sum_i sum_j w_ij dp_ij (t_ij - p_ij).
    """
    if len(outliers) != len(plan):
        raise ValueError("one outlier point per group is required")
    cells = cell_probabilities(theta, plan)
    grads = cell_gradients(theta, plan)
    acc = np.zeros(3)
    for point, p, d in zip(outliers, cells, grads):
        t = point.indicator
        if t.size != p.size:
            raise ValueError("outlier indicator length mismatch")
        w = _cell_weight(p, tuning, floor)
        acc += (w * (t - p)) @ d
    j_inv = _inverse_spd(j_matrix(theta, plan, tuning, floor))
    return j_inv @ acc


def outlier_lattice(plan: TestPlan):
    """Iterate every combination of one-hot outlier placements across groups."""
    from itertools import product

    sizes = [g.n_cells for g in plan]
    for combo in product(*(range(s) for s in sizes)):
        yield tuple(
            OutlierPoint(np.eye(s)[j]) for s, j in zip(sizes, combo)
        )
