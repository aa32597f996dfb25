"""Data generation, Monte-Carlo studies, parametric bootstrap and the
goodness-of-fit test.

All stochastic operations take one root seed; per-replicate generators are
derived through seed sequences so serial and parallel runs agree bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .divergence import FitResult, ObservedCounts, TuningParams, mepde, mle
from .model import ModelParams, TestPlan, cell_probabilities, sample_lifetime

__all__ = [
    "ContaminationSpec",
    "EstimatorSpec",
    "McReport",
    "BootstrapReport",
    "generate_dataset",
    "run_simulation",
    "bootstrap",
    "gof_test",
]

PARAM_NAMES = ("a", "b", "mu")


@dataclass(frozen=True)
class ContaminationSpec:
    """Mixture contamination: with rate epsilon draw from a Weibull generator.

    ``contaminant_params`` mirrors (a, b, mu): by default the contaminant
    shares the ramp-stress link, with Weibull survival
    exp[-((a* nu^b*) t)^mu*] per group.  ``plain_weibull=True`` instead uses
    a stress-free two-parameter Weibull with shape a* and scale b*.
    """

    epsilon: float = 0.0
    contaminant_params: tuple = (1.4, 1.0, 2.6)
    plain_weibull: bool = False

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")

    def sample(self, nu: float, rng: np.random.Generator, size: int) -> np.ndarray:
        a, b, mu = self.contaminant_params
        u = rng.uniform(size=size)
        if self.plain_weibull:
            shape, scale = a, b
            return scale * (-np.log(u)) ** (1.0 / shape)
        return (-np.log(u)) ** (1.0 / mu) / (a * nu**b)


@dataclass(frozen=True)
class EstimatorSpec:
    """Which fitter to run per replicate: plain MLE or a tuned divergence fit."""

    name: str
    tuning: TuningParams | None = None

    def __post_init__(self):
        if self.name not in ("mle", "mepde"):
            raise ValueError("estimator name must be 'mle' or 'mepde'")
        if self.name == "mepde" and self.tuning is None:
            raise ValueError("mepde requires tuning parameters")

    @property
    def label(self) -> str:
        if self.name == "mle":
            return "mle"
        a, b, g = self.tuning.as_tuple()
        return f"mepde({a:g},{b:g},{g:g})"

    def fit(self, counts: ObservedCounts, plan: TestPlan) -> FitResult:
        if self.name == "mle":
            return mle(counts, plan)
        warm = mle(counts, plan).theta_hat
        return mepde(counts, plan, self.tuning, init=warm)


@dataclass
class McReport:
    estimator: str
    abs_bias: np.ndarray
    rmse: np.ndarray
    n_reps: int
    n_dropped: int
    flagged: bool = False

    @property
    def rmse_plus(self) -> float:
        return float(self.rmse.sum())

    def rows(self):
        for name, bias, rmse in zip(PARAM_NAMES, self.abs_bias, self.rmse):
            yield {
                "estimator": self.estimator,
                "param": name,
                "bias": float(bias),
                "rmse": float(rmse),
            }


@dataclass
class BootstrapReport:
    theta_hat: np.ndarray
    bias: np.ndarray
    rmse: np.ndarray
    percentiles: dict = field(default_factory=dict)
    n_reps: int = 0
    n_dropped: int = 0

    @property
    def rmse_plus(self) -> float:
        return float(self.rmse.sum())


def _replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep)]))


def generate_dataset(
    theta: ModelParams,
    plan: TestPlan,
    contamination: ContaminationSpec = ContaminationSpec(),
    seed: int | np.random.Generator = 0,
) -> ObservedCounts:
    """Sample one dataset: per device a model or contaminant lifetime,
    tabulated against the group's inspection times."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lifetimes = []
    for g in plan:
        n = g.n_units
        t = sample_lifetime(theta, g.stress_rate, rng.uniform(size=n))
        if contamination.epsilon > 0:
            is_outlier = rng.uniform(size=n) < contamination.epsilon
            t_out = contamination.sample(g.stress_rate, rng, n)
            t = np.where(is_outlier, t_out, t)
        lifetimes.append(t)
    return ObservedCounts.from_lifetimes(plan, lifetimes)


def run_simulation(
    theta0: ModelParams,
    plan: TestPlan,
    contamination: ContaminationSpec,
    estimators,
    reps: int,
    seed: int = 0,
    drop_flag_rate: float = 0.2,
) -> list:
    """Monte-Carlo bias and RMSE of each estimator against theta0."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    estimates = {spec.label: [] for spec in estimators}
    dropped = {spec.label: 0 for spec in estimators}
    truth = theta0.as_array()
    for rep in range(reps):
        counts = generate_dataset(theta0, plan, contamination, _replicate_rng(seed, rep))
        for spec in estimators:
            try:
                fit = spec.fit(counts, plan)
            except (ValueError, np.linalg.LinAlgError):
                dropped[spec.label] += 1
                continue
            estimates[spec.label].append(fit.theta_hat.as_array())
    reports = []
    for spec in estimators:
        arr = np.asarray(estimates[spec.label])
        n_drop = dropped[spec.label]
        if arr.size == 0:
            raise RuntimeError(f"every replicate failed for {spec.label}")
        err = arr - truth
        reports.append(
            McReport(
                estimator=spec.label,
                abs_bias=np.abs(err.mean(axis=0)),
                rmse=np.sqrt((err**2).mean(axis=0)),
                n_reps=arr.shape[0],
                n_dropped=n_drop,
                flagged=n_drop > drop_flag_rate * reps,
            )
        )
    return reports


def bootstrap(
    counts: ObservedCounts,
    plan: TestPlan,
    estimator_spec: EstimatorSpec,
    b_reps: int,
    seed: int = 0,
    level: float = 0.95,
) -> BootstrapReport:
    """Parametric bootstrap around the fit on the observed data."""
    fit = estimator_spec.fit(counts, plan)
    theta_hat = fit.theta_hat
    center = theta_hat.as_array()
    draws = []
    dropped = 0
    for rep in range(b_reps):
        boot_counts = generate_dataset(
            theta_hat, plan, ContaminationSpec(), _replicate_rng(seed, rep)
        )
        try:
            refit = estimator_spec.fit(boot_counts, plan)
        except (ValueError, np.linalg.LinAlgError):
            dropped += 1
            continue
        draws.append(refit.theta_hat.as_array())
    arr = np.asarray(draws)
    if arr.size == 0:
        raise RuntimeError("every bootstrap replicate failed")
    err = arr - center
    lo, hi = 50 * (1 - level), 50 * (1 + level)
    return BootstrapReport(
        theta_hat=center,
        bias=err.mean(axis=0),
        rmse=np.sqrt((err**2).mean(axis=0)),
        percentiles={
            name: (float(np.percentile(arr[:, i], lo)), float(np.percentile(arr[:, i], hi)))
            for i, name in enumerate(PARAM_NAMES)
        },
        n_reps=arr.shape[0],
        n_dropped=dropped,
    )


def gof_statistic(counts: ObservedCounts, plan: TestPlan, theta: ModelParams) -> float:
    """Sum over all cells of |observed - expected| / expected counts."""
    ts = 0.0
    for g, n, p in zip(plan, counts.counts, cell_probabilities(theta, plan)):
        expected = g.n_units * p
        if np.any(expected == 0):
            j = int(np.argmin(expected))
            raise ValueError(f"expected count is zero in cell {j} of a group")
        ts += float(np.sum(np.abs(n - expected) / expected))
    return ts


def gof_test(
    counts: ObservedCounts,
    plan: TestPlan,
    b_reps: int = 1000,
    seed: int = 0,
):
    """Distance-based bootstrap goodness-of-fit test.

    Returns (TS, p) where p is the fraction of parametric-bootstrap
    statistics at least as large as the observed one.
    """
    fit = mle(counts, plan)
    ts = gof_statistic(counts, plan, fit.theta_hat)
    exceed = 0
    valid = 0
    for rep in range(b_reps):
        boot_counts = generate_dataset(
            fit.theta_hat, plan, ContaminationSpec(), _replicate_rng(seed, rep)
        )
        try:
            boot_fit = mle(boot_counts, plan)
            ts_star = gof_statistic(boot_counts, plan, boot_fit.theta_hat)
        except (ValueError, np.linalg.LinAlgError):
            continue
        valid += 1
        if ts_star >= ts:
            exceed += 1
    if valid == 0:
        raise RuntimeError("every bootstrap replicate failed")
    return ts, exceed / valid
