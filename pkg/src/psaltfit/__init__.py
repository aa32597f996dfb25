"""Robust reliability inference and test-plan design for nondestructive
one-shot devices under progressive (ramp) stress."""

from .model import (
    GroupPlan,
    ModelParams,
    TestPlan,
    cell_probabilities,
    cumulative_hazard,
    hazard,
    sample_lifetime,
    score_vectors,
    survival,
)
from .divergence import (
    FitResult,
    ObservedCounts,
    TuningParams,
    epd_estimating_residual,
    epd_objective,
    generator_b,
    log_likelihood,
    mepde,
    mle,
)
from .asymptotics import (
    OutlierPoint,
    SandwichMatrices,
    asym_covariance,
    confidence_intervals,
    influence_function,
    j_matrix,
    k_matrix,
)
from .tuning import (
    TuningGrid,
    csm_criterion,
    csm_select,
    default_grid,
    iwj_select,
    min_error_select,
    wj_mse,
)
from .montecarlo import (
    ContaminationSpec,
    EstimatorSpec,
    bootstrap,
    generate_dataset,
    gof_test,
    run_simulation,
)
from .design import (
    CostParams,
    DesignSolution,
    SwarmSettings,
    constraint_violation,
    cpso,
    design_objective,
    expected_cost,
)
from .estimators import PsaltMEPDE, PsaltMLE
from .datasets import load_lightbulbs

__version__ = "0.1.0"
