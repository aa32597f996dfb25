"""Selection of the divergence tuning (alpha, beta, gamma).

Five selectors are provided: the pilot-based estimated-MSE rule (WJ), its
iterative refinement (IWJ), three grid rules minimizing cell-probability
errors (max / mean / median), and a score-matching rule for the discrete
cell lattice built from relative changes of an unnormalized model over a
chain-shaped neighborhood graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .asymptotics import asym_covariance
from .divergence import FitResult, ObservedCounts, TuningParams, mepde, mle
from .model import PROB_FLOOR, ModelParams, TestPlan, cell_probabilities

__all__ = [
    "TuningGrid",
    "SelectionResult",
    "default_grid",
    "wj_mse",
    "iwj_select",
    "min_error_select",
    "csm_q",
    "concrete_score",
    "neighborhoods",
    "reverse_neighborhoods",
    "csm_criterion",
    "csm_select",
]


@dataclass(frozen=True)
class TuningGrid:
    alphas: tuple
    betas: tuple
    gammas: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if not (self.alphas and self.betas and self.gammas):
            raise ValueError("grid axes must be nonempty")

    def points(self) -> list:
        """Admissible grid members, deduplicating the redundant axes.

        beta = 0 makes alpha irrelevant and beta = 1 makes gamma irrelevant;
        one representative (the first axis value) is kept for each.
        """
        seen = set()
        out = []
        for beta in self.betas:
            for alpha in self.alphas if beta > 0 else self.alphas[:1]:
                for gamma in self.gammas if beta < 1 else self.gammas[:1]:
                    key = (
                        alpha if beta > 0 else None,
                        beta,
                        gamma if beta < 1 else None,
                    )
                    if key in seen:
                        continue
                    seen.add(key)
                    out.append(TuningParams(alpha, beta, gamma))
        return out


def default_grid() -> TuningGrid:
    return TuningGrid(
        alphas=(-15, -10, -8, -6, -4, -2, -1, 1, 2, 4, 6, 9),
        betas=tuple(np.round(np.arange(0.0, 1.01, 0.1), 10)),
        gammas=tuple(np.round(np.arange(0.02, 0.99, 0.04), 10)) + (1.0,),
    )


@dataclass
class SelectionResult:
    tuning: TuningParams
    fit: FitResult
    scores: list = field(default_factory=list)
    flag: str | None = None


def _tie_key(tuning: TuningParams):
    return (abs(tuning.alpha), tuning.beta, tuning.gamma)


def wj_mse(
    tuning: TuningParams,
    pilot: ModelParams,
    counts: ObservedCounts,
    plan: TestPlan,
) -> float:
    """Estimated MSE against a pilot: squared bias plus sandwich trace."""
    score, _ = _wj_score(tuning, pilot, counts, plan)
    return score


def _wj_score(tuning, pilot, counts, plan):
    try:
        fit = mepde(counts, plan, tuning, init=pilot)
        cov = asym_covariance(fit.theta_hat, plan, tuning).cov
    except (ValueError, np.linalg.LinAlgError):
        return np.inf, None
    diff = fit.theta_hat.as_array() - pilot.as_array()
    return float(diff @ diff + np.trace(cov)), fit


def iwj_select(
    counts: ObservedCounts,
    plan: TestPlan,
    grid: TuningGrid,
    max_iter: int = 20,
) -> SelectionResult:
    """Iterate pilot -> argmin estimated MSE -> refit until the selection
    stabilizes; a period-2 oscillation returns the lower-scoring member."""
    points = grid.points()
    pilot = mle(counts, plan).theta_hat
    history = []
    best = None
    for _ in range(max_iter):
        scored = []
        for pt in points:
            score, fit = _wj_score(pt, pilot, counts, plan)
            scored.append((score, pt, fit))
        valid = [s for s in scored if s[2] is not None]
        if not valid:
            raise RuntimeError("every grid point failed to fit")
        score, chosen, fit = min(valid, key=lambda s: (s[0], _tie_key(s[1])))
        best = SelectionResult(
            tuning=chosen, fit=fit, scores=[(s[1], s[0]) for s in scored]
        )
        if history and history[-1][0] == chosen:
            return best
        if len(history) >= 2 and history[-2][0] == chosen:
            prev_tuning, prev_score, prev_fit, prev_scores = history[-1]
            if prev_score < score:
                best = SelectionResult(
                    tuning=prev_tuning, fit=prev_fit, scores=prev_scores
                )
            best.flag = "period-2 oscillation"
            return best
        history.append((chosen, score, fit, best.scores))
        pilot = fit.theta_hat
    best.flag = "max iterations reached"
    return best


def min_error_select(
    counts: ObservedCounts,
    plan: TestPlan,
    grid: TuningGrid,
    criterion: str = "MAE",
) -> SelectionResult:
    """Grid rule on |p_ij(theta_hat) - q_ij| reduced by max, mean or median."""
    reducers = {"AMAX": np.max, "MAE": np.mean, "AMED": np.median}
    if criterion not in reducers:
        raise ValueError(f"criterion must be one of {sorted(reducers)}")
    reduce = reducers[criterion]
    warm = mle(counts, plan).theta_hat
    q_all = np.concatenate(counts.proportions)
    scored = []
    for pt in grid.points():
        try:
            fit = mepde(counts, plan, pt, init=warm)
        except (ValueError, np.linalg.LinAlgError):
            scored.append((np.inf, pt, None))
            continue
        p_all = np.concatenate(cell_probabilities(fit.theta_hat, plan))
        scored.append((float(reduce(np.abs(p_all - q_all))), pt, fit))
    valid = [s for s in scored if s[2] is not None]
    if not valid:
        raise RuntimeError("every grid point failed to fit")
    score, chosen, fit = min(valid, key=lambda s: (s[0], _tie_key(s[1])))
    return SelectionResult(
        tuning=chosen, fit=fit, scores=[(s[1], s[0]) for s in scored]
    )


def neighborhoods(n_cells: int) -> list:
    """Chain graph over a group's cell lattice: endpoints have one neighbor."""
    if n_cells < 2:
        raise ValueError("a lattice needs at least two cells")
    nbrs = []
    for j in range(n_cells):
        if j == 0:
            nbrs.append([1])
        elif j == n_cells - 1:
            nbrs.append([j - 1])
        else:
            nbrs.append([j - 1, j + 1])
    return nbrs


def reverse_neighborhoods(n_cells: int) -> list:
    """Incoming edges per cell as (source, slot) pairs."""
    nbrs = neighborhoods(n_cells)
    rev = [[] for _ in range(n_cells)]
    for j, targets in enumerate(nbrs):
        for m, tgt in enumerate(targets):
            rev[tgt].append((j, m))
    return rev


def _q_lattice(theta, tuning, plan, group_index, floor=PROB_FLOOR):
    """Unnormalized model value at every one-hot point of a group's lattice.

    The per-device average in the defining expression collapses because the
    summand does not depend on the device index.
    """
    alpha, beta, gamma = tuning.as_tuple()
    p = cell_probabilities(theta, plan)[group_index]
    pf = np.maximum(p, floor)
    const = np.zeros_like(pf)
    weight = np.zeros_like(pf)
    if beta > 0:
        e = np.exp(alpha * pf)
        const += (beta / alpha) * e * (pf - 1.0 / alpha)
        weight += (beta / alpha) * e
    if beta < 1:
        if gamma > 0:
            const += (1.0 - beta) * pf ** (gamma + 1.0)
            # ((gamma+1)/gamma) p^gamma shifted by a cell-independent
            # constant, which multiplies every Q by a common factor and
            # cancels in the relative scores; the shift keeps small gamma
            # finite instead of overflowing exp
            weight += ((gamma + 1.0) / gamma) * (1.0 - beta) * np.expm1(
                gamma * np.log(pf)
            )
        else:
            # gamma -> 0 limit of the shifted weight
            const += (1.0 - beta) * pf
            weight += (1.0 - beta) * np.log(pf)
    return np.exp(-(const.sum() - weight))


def csm_q(
    theta: ModelParams,
    tuning: TuningParams,
    counts: ObservedCounts,
    plan: TestPlan,
    group_index: int,
    cell_index: int,
) -> float:
    """Unnormalized model value at one lattice point; strictly positive."""
    del counts  # the per-device average collapses, see _q_lattice
    q = _q_lattice(theta, tuning, plan, group_index)
    return float(q[cell_index])


def concrete_score(q_values, group_index: int, cell_index: int) -> np.ndarray:
    """Relative neighbor differences (Q(nbr) - Q(x)) / Q(x) at one point."""
    q = np.asarray(q_values[group_index], dtype=float)
    if np.any(q <= 0):
        raise ValueError("lattice values must be strictly positive")
    nbrs = neighborhoods(q.size)[cell_index]
    return (q[nbrs] - q[cell_index]) / q[cell_index]


def csm_criterion(
    theta_hat: ModelParams,
    tuning: TuningParams,
    counts: ObservedCounts,
    plan: TestPlan,
) -> float:
    """Unbiased score-matching criterion evaluated on the observed data.

    The first part averages c^2 + 2c over each observed point's outgoing
    edges; the second averages 2c over its incoming edges.  Observations in
    the same cell share a lattice point, so the per-device sums reduce to
    count-weighted lattice sums.
    """
    total = 0.0
    for i, (g, n) in enumerate(zip(plan, counts.counts)):
        n_i = n.sum()
        if n_i == 0:
            raise ValueError(f"group {i} has no observations")
        q_lat = [_q_lattice(theta_hat, tuning, plan, i)]
        scores = [concrete_score(q_lat, 0, j) for j in range(g.n_cells)]
        rev = reverse_neighborhoods(g.n_cells)
        phi1 = 0.0
        phi2 = 0.0
        for j in range(g.n_cells):
            c = scores[j]
            phi1 += n[j] * float(np.sum(c * c + 2.0 * c))
            phi2 += n[j] * sum(2.0 * scores[src][m] for src, m in rev[j])
        total += (phi1 - phi2) / n_i
    return total


def csm_select(
    counts: ObservedCounts,
    plan: TestPlan,
    grid: TuningGrid,
) -> SelectionResult:
    """Fit at every grid point and minimize the score-matching criterion."""
    warm = mle(counts, plan).theta_hat
    scored = []
    for pt in grid.points():
        try:
            fit = mepde(counts, plan, pt, init=warm)
            score = csm_criterion(fit.theta_hat, pt, counts, plan)
        except (ValueError, np.linalg.LinAlgError):
            scored.append((np.inf, pt, None))
            continue
        scored.append((score, pt, fit))
    valid = [s for s in scored if s[2] is not None]
    if not valid:
        raise RuntimeError("every grid point failed to fit")
    score, chosen, fit = min(valid, key=lambda s: (s[0], _tie_key(s[1])))
    return SelectionResult(
        tuning=chosen, fit=fit, scores=[(s[1], s[0]) for s in scored]
    )
