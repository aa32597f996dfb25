"""A-optimal test-plan search under budget and time constraints.

A candidate plan assigns each stress group a device count and ordered
inspection times.  The objective is the trace of the sandwich covariance of
the parameter estimates; the budget and termination-time constraints enter
through a violation measure handled by Deb's feasibility rule inside a
particle swarm search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .asymptotics import SingularMatrixError, asym_covariance
from .divergence import TuningParams
from .model import GroupPlan, ModelParams, TestPlan, cell_probabilities

__all__ = [
    "CostParams",
    "DesignSolution",
    "SwarmSettings",
    "expected_cost",
    "constraint_violation",
    "design_objective",
    "cpso",
    "repair_hard_constraints",
]


@dataclass(frozen=True)
class CostParams:
    c_a: float  # installation
    c_u: float  # per item
    c_0: float  # per unit time
    c_s: float  # per inspection
    c_v: float  # salvage per survivor
    budget: float
    tau_max: float

    def __post_init__(self):
        if not 0.0 <= self.c_v < self.c_u:
            raise ValueError("salvage must satisfy 0 <= c_v < c_u")
        if min(self.c_a, self.c_u, self.c_0, self.c_s) < 0:
            raise ValueError("costs must be nonnegative")
        if self.budget <= self.c_a:
            raise ValueError("budget must exceed the installation cost")
        if self.tau_max <= 0:
            raise ValueError("tau_max must be positive")


@dataclass
class DesignSolution:
    allocation: np.ndarray
    inspection_times: list
    cost: float
    violation: float
    objective: float
    feasible: bool = True

    def to_plan(self, stress_rates) -> TestPlan:
        return _build_plan(self.allocation, self.inspection_times, stress_rates)

    def to_dict(self) -> dict:
        return {
            "allocation": [int(n) for n in self.allocation],
            "inspection_times": [list(map(float, t)) for t in self.inspection_times],
            "cost": float(self.cost),
            "violation": float(self.violation),
            "objective": float(self.objective),
            "feasible": bool(self.feasible),
        }


@dataclass(frozen=True)
class SwarmSettings:
    size: int = 20
    w: float = 0.3
    c1: float = 0.5
    c2: float = 0.5
    max_iter: int = 500
    tol: float = 1e-8
    n_max: int = 75
    velocity_clamp: float = 0.2


def _build_plan(allocation, times, stress_rates) -> TestPlan:
    return TestPlan(
        [
            GroupPlan(n_units=int(n), stress_rate=float(nu), inspection_times=np.sort(t))
            for n, nu, t in zip(allocation, stress_rates, times)
        ]
    )


def expected_cost(
    allocation,
    times,
    stress_rates,
    theta: ModelParams,
    cost: CostParams,
) -> float:
    """Installation + items + operating time + inspections - salvage.

    The expected failure total is sum_i N_i (1 - p_is) at ``theta``.
    """
    allocation = np.asarray(allocation, dtype=int)
    plan = _build_plan(allocation, times, stress_rates)
    cells = cell_probabilities(theta, plan)
    n_total = allocation.sum()
    d_failures = sum(n * (1.0 - p[-1]) for n, p in zip(allocation, cells))
    return (
        cost.c_a
        + cost.c_u * n_total
        + cost.c_0 * sum(float(np.max(t)) for t in times)
        + cost.c_s * sum(len(t) for t in times)
        - (n_total - d_failures) * cost.c_v
    )


def constraint_violation(
    allocation,
    times,
    stress_rates,
    theta: ModelParams,
    cost: CostParams,
    normalized: bool = False,
) -> float:
    """Budget overrun plus termination-time overruns.

    The time term repeats the (group-independent) overrun of the latest
    termination time once per (group, inspection) pair, exactly as the
    violation measure is written; ``normalized=True`` counts it once.
    """
    c = expected_cost(allocation, times, stress_rates, theta, cost)
    over_budget = max(0.0, c - cost.budget)
    latest = max(float(np.max(t)) for t in times)
    over_time = max(0.0, latest - cost.tau_max)
    if normalized:
        return over_budget + over_time
    return over_budget + sum(len(t) for t in times) * over_time


def design_objective(
    allocation,
    times,
    stress_rates,
    theta: ModelParams,
    tuning: TuningParams,
    weighting: str = "literal",
) -> float:
    """Trace of the sandwich covariance; +inf when the bread is singular."""
    plan = _build_plan(allocation, times, stress_rates)
    try:
        mats = asym_covariance(theta, plan, tuning, weighting=weighting)
    except (SingularMatrixError, ValueError):
        return np.inf
    return float(np.trace(mats.cov))


@dataclass
class _Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest: np.ndarray
    pbest_phi: float = np.inf
    pbest_psi: float = np.inf


def _layout(n_inspections):
    """Index ranges of the flat position vector [N_1..N_k, taus...]."""
    k = len(n_inspections)
    slices = []
    start = k
    for j in n_inspections:
        slices.append(slice(start, start + j))
        start += j
    return k, slices, start


def _decode(x, k, tau_slices, n_max):
    allocation = np.clip(np.floor(x[:k]).astype(int), 1, n_max)
    times = [np.sort(x[s]) for s in tau_slices]
    return allocation, times


def _shape_valid(x, k, tau_slices):
    if np.any(x[:k] < 1.0):
        return False
    for s in tau_slices:
        t = x[s]
        if np.any(t <= 0) or np.any(np.diff(t) < 0):
            return False
    return True


def repair_hard_constraints(
    position,
    velocity,
    previous,
    ranges,
    k,
    tau_slices,
    settings: SwarmSettings,
    pbest,
    gbest,
    rng: np.random.Generator,
    max_attempts: int = 50,
):
    """Redraw the velocity randomness until the particle is shape-valid.

    Falls back to clamping counts to one and sorting times ascending after
    ``max_attempts`` redraws, so a shape-valid particle is always returned.
    """
    if _shape_valid(position, k, tau_slices):
        return position, velocity
    vmax = settings.velocity_clamp * ranges
    for _ in range(max_attempts):
        r1 = rng.uniform(size=position.shape)
        r2 = rng.uniform(size=position.shape)
        v = (
            settings.w * velocity
            + settings.c1 * r1 * (pbest - previous)
            + settings.c2 * r2 * (gbest - previous)
        )
        v = np.clip(v, -vmax, vmax)
        x = previous + v
        if _shape_valid(x, k, tau_slices):
            return x, v
    x = position.copy()
    x[:k] = np.maximum(x[:k], 1.0)
    for s in tau_slices:
        x[s] = np.sort(np.maximum(x[s], 1e-6))
    return x, velocity


def cpso(
    theta: ModelParams,
    tuning: TuningParams,
    cost: CostParams,
    stress_rates,
    n_inspections,
    settings: SwarmSettings = SwarmSettings(),
    seed: int = 0,
    weighting: str = "literal",
):
    """Constrained particle swarm search for an A-optimal plan.

    Personal bests follow Deb's rule (feasible beats infeasible, feasibles
    compare by objective, infeasibles by violation); the global best is the
    lowest-objective feasible personal best, or the least-violating one if
    no particle is feasible yet.  Returns (DesignSolution, trace) where the
    trace rows are (iteration, gbest objective, gbest violation).
    """
    rng = np.random.default_rng(seed)
    k, tau_slices, dim = _layout(n_inspections)
    ranges = np.empty(dim)
    ranges[:k] = settings.n_max - 1.0
    for s in tau_slices:
        ranges[s] = cost.tau_max
    vmax = settings.velocity_clamp * ranges

    def evaluate(x):
        allocation, times = _decode(x, k, tau_slices, settings.n_max)
        psi = constraint_violation(allocation, times, stress_rates, theta, cost)
        phi = design_objective(allocation, times, stress_rates, theta, tuning,
                               weighting)
        return phi, psi

    particles = []
    for _ in range(settings.size):
        x = np.empty(dim)
        x[:k] = rng.uniform(1.0, settings.n_max, size=k)
        for s in tau_slices:
            x[s] = np.sort(rng.uniform(0.0, cost.tau_max, size=s.stop - s.start))
        phi, psi = evaluate(x)
        particles.append(
            _Particle(position=x, velocity=np.zeros(dim), pbest=x.copy(),
                      pbest_phi=phi, pbest_psi=psi)
        )

    def global_best():
        feasible = [p for p in particles if p.pbest_psi == 0.0]
        if feasible:
            return min(feasible, key=lambda p: p.pbest_phi)
        return min(particles, key=lambda p: p.pbest_psi)

    gbest = global_best()
    trace = [(0, gbest.pbest_phi, gbest.pbest_psi)]
    prev_phi = gbest.pbest_phi
    for it in range(1, settings.max_iter + 1):
        gbest_pos = gbest.pbest.copy()
        for p in particles:
            r1 = rng.uniform(size=dim)
            r2 = rng.uniform(size=dim)
            v = (
                settings.w * p.velocity
                + settings.c1 * r1 * (p.pbest - p.position)
                + settings.c2 * r2 * (gbest_pos - p.position)
            )
            v = np.clip(v, -vmax, vmax)
            x = p.position + v
            x, v = repair_hard_constraints(
                x, v, p.position, ranges, k, tau_slices, settings,
                p.pbest, gbest_pos, rng,
            )
            phi, psi = evaluate(x)
            p.position, p.velocity = x, v
            # Deb's rule for the personal best
            if psi == 0.0 and p.pbest_psi == 0.0:
                if phi <= p.pbest_phi:
                    p.pbest, p.pbest_phi, p.pbest_psi = x.copy(), phi, psi
            elif psi == 0.0:
                p.pbest, p.pbest_phi, p.pbest_psi = x.copy(), phi, psi
            elif p.pbest_psi == 0.0:
                pass
            elif psi <= p.pbest_psi:
                p.pbest, p.pbest_phi, p.pbest_psi = x.copy(), phi, psi
        gbest = global_best()
        trace.append((it, gbest.pbest_phi, gbest.pbest_psi))
        if (
            gbest.pbest_psi == 0.0
            and np.isfinite(gbest.pbest_phi)
            and np.isfinite(prev_phi)
            and abs(prev_phi - gbest.pbest_phi) < settings.tol
        ):
            break
        prev_phi = gbest.pbest_phi

    allocation, times = _decode(gbest.pbest, k, tau_slices, settings.n_max)
    solution = DesignSolution(
        allocation=allocation,
        inspection_times=times,
        cost=expected_cost(allocation, times, stress_rates, theta, cost),
        violation=gbest.pbest_psi,
        objective=gbest.pbest_phi,
        feasible=gbest.pbest_psi == 0.0,
    )
    return solution, trace
