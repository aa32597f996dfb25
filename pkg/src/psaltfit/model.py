"""Log-logistic lifetime model under progressive (ramp) stress.

A device in group ``i`` is ramped at stress rate ``nu_i`` and inspected at
ordered times ``tau_i1 <= ... <= tau_iJ``.  Under the tampered-failure-rate
link with the inverse power law ``scale = 1 / (a * stress^b)``, the survival
function is

    S_i(t) = [1 + (a * nu_i^b)^mu * t^(mu*(b+1))]^(-1/(b+1)).

Everything here is a pure function of its inputs; all heavy lifting happens
in log space so that large exponents ``mu*(b+1)`` do not overflow.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "GroupPlan",
    "TestPlan",
    "PROB_FLOOR",
    "survival",
    "hazard",
    "cumulative_hazard",
    "cell_probabilities",
    "cell_gradients",
    "score_vectors",
    "sample_lifetime",
    "load_plan",
    "write_cells_csv",
]

# Cells below this value are clamped before logs / negative powers are taken.
PROB_FLOOR = 1e-12


class SingularCellError(ValueError):
    """A cell probability hit the floor where a log or p^(g-1) is needed."""


@dataclass(frozen=True)
class ModelParams:
    """Inverse-power-law coefficients and log-logistic shape, all positive."""

    a: float
    b: float
    mu: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.mu > 0):
            raise ValueError(f"model parameters must be positive, got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.mu], dtype=float)

    @staticmethod
    def from_array(x) -> "ModelParams":
        a, b, mu = np.asarray(x, dtype=float)
        return ModelParams(a, b, mu)


@dataclass(frozen=True)
class GroupPlan:
    """One stress group: unit count, ramp rate and ordered inspection times."""

    n_units: int
    stress_rate: float
    inspection_times: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "inspection_times", np.asarray(self.inspection_times, dtype=float)
        )
        tau = self.inspection_times
        if self.n_units < 1:
            raise ValueError("n_units must be a positive integer")
        if not self.stress_rate > 0:
            raise ValueError("stress_rate must be positive")
        if tau.ndim != 1 or tau.size == 0:
            raise ValueError("inspection_times must be a nonempty 1-d sequence")
        if not np.all(tau > 0):
            raise ValueError("inspection_times must be strictly positive")
        if np.any(np.diff(tau) < 0):
            raise ValueError("inspection_times must be nondecreasing")

    @property
    def n_cells(self) -> int:
        return self.inspection_times.size + 1


@dataclass(frozen=True)
class TestPlan:
    # not a test case, despite the name pytest sees on import
    __test__ = False

    groups: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if len(self.groups) < 1:
            raise ValueError("a test plan needs at least one group")

    @property
    def n_total(self) -> int:
        return sum(g.n_units for g in self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __len__(self):
        return len(self.groups)


def _check_inputs(nu, t):
    if not nu > 0:
        raise ValueError(f"stress rate must be positive, got {nu}")
    if np.any(np.asarray(t) < 0):
        raise ValueError(f"time must be nonnegative, got {t}")


def _log_a1(theta: ModelParams, nu: float, t):
    """log of (a*nu^b)^mu * t^(mu*(b+1)), with -inf at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, -np.inf)
    pos = t > 0
    out[pos] = theta.mu * (np.log(theta.a) + theta.b * np.log(nu)) + theta.mu * (
        theta.b + 1.0
    ) * np.log(t[pos])
    return out


def survival(theta: ModelParams, nu: float, t):
    """Survival probability at time ``t`` for a group ramped at rate ``nu``."""
    _check_inputs(nu, t)
    log_a1 = _log_a1(theta, nu, t)
    log1p_a1 = np.logaddexp(0.0, log_a1)
    return np.exp(-log1p_a1 / (theta.b + 1.0))


def cumulative_hazard(theta: ModelParams, nu: float, t):
    """H(t) = log[1 + (a*nu^b)^mu * t^(mu*(b+1))] / (b+1); exp(-H) = S."""
    _check_inputs(nu, t)
    return np.logaddexp(0.0, _log_a1(theta, nu, t)) / (theta.b + 1.0)


def hazard(theta: ModelParams, nu: float, t):
    """Hazard rate dH/dt = mu * A1 / (t * (1 + A1)); requires t > 0."""
    _check_inputs(nu, t)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("hazard requires strictly positive time")
    log_a1 = _log_a1(theta, nu, t)
    # A1/(1+A1) = exp(log_a1 - log1p(A1)), stable for any magnitude of A1
    frac = np.exp(log_a1 - np.logaddexp(0.0, log_a1))
    return theta.mu * frac / t


def _survival_and_gradient(theta: ModelParams, nu: float, tau):
    """S(tau) and dS/d(a, b, mu) at each inspection time; tau = 0 allowed."""
    tau = np.asarray(tau, dtype=float)
    a, b, mu = theta.a, theta.b, theta.mu
    log_a1 = _log_a1(theta, nu, tau)
    l1p = np.logaddexp(0.0, log_a1)
    s = np.exp(-l1p / (b + 1.0))
    # A3 = A1 * (1+A1)^(-(b+2)/(b+1)); zero at tau = 0 where log_a1 = -inf
    a3 = np.exp(log_a1 - (b + 2.0) / (b + 1.0) * l1p)
    a3 = np.where(np.isfinite(log_a1), a3, 0.0)

    ds_da = -(mu / a) * a3 / (b + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_nu_tau = np.where(tau > 0, np.log(nu * tau), 0.0)
    ds_db = (s * l1p / (b + 1.0) - mu * log_nu_tau * a3) / (b + 1.0)
    # a3 * log_a1 -> 0 as tau -> 0; avoid evaluating 0 * (-inf)
    a3_log = np.zeros_like(a3)
    finite = np.isfinite(log_a1)
    a3_log[finite] = a3[finite] * log_a1[finite]
    ds_dmu = -a3_log / (mu * (b + 1.0))
    return s, np.stack([ds_da, ds_db, ds_dmu], axis=-1)


def cell_probabilities(theta: ModelParams, plan: TestPlan) -> list:
    """Interval and survivor cell probabilities per group.

    Returns one array of length ``J_i + 1`` per group; the last entry is the
    survivor cell S(tau_iJ).  Each array sums to one.
    """
    cells = []
    for g in plan:
        s = survival(theta, g.stress_rate, np.concatenate(([0.0], g.inspection_times)))
        p = np.empty(g.n_cells)
        p[:-1] = -np.diff(s)
        p[-1] = s[-1]
        cells.append(p)
    return cells


def cell_gradients(theta: ModelParams, plan: TestPlan) -> list:
    """d p_ij / d(a, b, mu) per group, shape (J_i + 1, 3); rows sum to zero."""
    grads = []
    for g in plan:
        tau = np.concatenate(([0.0], g.inspection_times))
        _, ds = _survival_and_gradient(theta, g.stress_rate, tau)
        d = np.empty((g.n_cells, 3))
        d[:-1] = ds[:-1] - ds[1:]
        d[-1] = ds[-1]
        grads.append(d)
    return grads


def score_vectors(theta: ModelParams, plan: TestPlan, floor: float = PROB_FLOOR) -> list:
    """u_ij = d log p_ij / d(a, b, mu) per group, shape (J_i + 1, 3).

    Raises SingularCellError if any cell probability is at or below ``floor``.
    """
    cells = cell_probabilities(theta, plan)
    grads = cell_gradients(theta, plan)
    scores = []
    for i, (p, d) in enumerate(zip(cells, grads)):
        if np.any(p <= floor):
            j = int(np.argmin(p))
            raise SingularCellError(
                f"cell probability p[{i}][{j}] = {p[j]:.3e} is at the floor"
            )
        scores.append(d / p[:, None])
    return scores


def sample_lifetime(theta: ModelParams, nu: float, uniform_draw):
    """Invert the survival function: returns t with S(t) = uniform_draw."""
    u = np.asarray(uniform_draw, dtype=float)
    if np.any(u <= 0) or np.any(u >= 1):
        raise ValueError("uniform_draw must lie strictly inside (0, 1)")
    a, b, mu = theta.a, theta.b, theta.mu
    # u^-(b+1) - 1 = expm1(-(b+1) log u), always positive here
    log_num = np.log(np.expm1(-(b + 1.0) * np.log(u)))
    log_t = (log_num - mu * (np.log(a) + b * np.log(nu))) / (mu * (b + 1.0))
    return np.exp(log_t)


def load_plan(path) -> TestPlan:
    """Read a test plan from {"groups":[{"n":..,"nu":..,"tau":[..]},..]}."""
    with open(path) as fh:
        doc = json.load(fh)
    return plan_from_dict(doc)


def plan_from_dict(doc: dict) -> TestPlan:
    groups = []
    for g in doc["groups"]:
        groups.append(
            GroupPlan(
                n_units=int(g["n"]),
                stress_rate=float(g["nu"]),
                inspection_times=np.asarray(g["tau"], dtype=float),
            )
        )
    return TestPlan(groups)


def write_cells_csv(path, theta: ModelParams, plan: TestPlan):
    """Emit cells and score components as group,cell,p,du_da,du_db,du_dmu."""
    cells = cell_probabilities(theta, plan)
    scores = score_vectors(theta, plan)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "cell", "p", "du_da", "du_db", "du_dmu"])
        for i, (p, u) in enumerate(zip(cells, scores), start=1):
            for j in range(p.size):
                writer.writerow(
                    [i, j + 1, f"{p[j]:.9g}"] + [f"{v:.9g}" for v in u[j]]
                )
