"""Scikit-learn style estimator wrappers around the fitting routines.

The estimators carry their hyperparameters through ``get_params`` /
``set_params`` so they compose with model-selection utilities; ``fit``
takes the observed interval counts together with the test plan instead of
a feature matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .asymptotics import asym_covariance, confidence_intervals
from .divergence import ObservedCounts, TuningParams, mepde, mle
from .model import ModelParams, TestPlan, cell_probabilities

__all__ = ["PsaltMLE", "PsaltMEPDE", "check_fit_inputs"]


def check_fit_inputs(counts, plan):
    """Validate and coerce the (counts, plan) pair used by ``fit``."""
    if not isinstance(plan, TestPlan):
        raise TypeError("plan must be a TestPlan")
    if not isinstance(counts, ObservedCounts):
        counts = ObservedCounts(counts)
    if len(counts.counts) != len(plan):
        raise ValueError("counts and plan disagree on the number of groups")
    return counts, plan


class _PsaltFitterMixin:
    def predict_cell_probabilities(self, plan: TestPlan):
        self._check_fitted()
        return cell_probabilities(self.theta_, plan)

    def covariance(self, plan: TestPlan, level: float = 0.95):
        """Sandwich covariance and Wald intervals at the fitted parameters."""
        self._check_fitted()
        mats = asym_covariance(self.theta_, plan, self._fit_tuning())
        return mats, confidence_intervals(self.result_, mats.cov, level)

    def _check_fitted(self):
        if not hasattr(self, "theta_"):
            raise AttributeError("estimator is not fitted yet")


class PsaltMLE(BaseEstimator, _PsaltFitterMixin):
    """Maximum-likelihood fit of the ramp-stress log-logistic model."""

    def __init__(self, init_a=1.0, init_b=1.0, init_mu=1.0):
        self.init_a = init_a
        self.init_b = init_b
        self.init_mu = init_mu

    def fit(self, counts, plan: TestPlan):
        counts, plan = check_fit_inputs(counts, plan)
        init = ModelParams(self.init_a, self.init_b, self.init_mu)
        self.result_ = mle(counts, plan, init=init)
        self.theta_ = self.result_.theta_hat
        return self

    def _fit_tuning(self):
        # Kullback-Leibler limit of the divergence family
        return TuningParams(alpha=1.0, beta=0.0, gamma=1e-6)


class PsaltMEPDE(BaseEstimator, _PsaltFitterMixin):
    """Minimum-divergence fit with robustness tuning (alpha, beta, gamma)."""

    def __init__(self, alpha=-1.0, beta=0.2, gamma=1.0, max_cycles=500):
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.max_cycles = max_cycles

    def fit(self, counts, plan: TestPlan, init: ModelParams | None = None):
        counts, plan = check_fit_inputs(counts, plan)
        self.result_ = mepde(
            counts, plan, self._fit_tuning(), init=init, max_cycles=self.max_cycles
        )
        self.theta_ = self.result_.theta_hat
        return self

    def _fit_tuning(self):
        return TuningParams(self.alpha, self.beta, self.gamma)
