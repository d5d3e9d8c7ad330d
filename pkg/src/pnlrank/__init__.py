"""Rank-based causal discovery for post-nonlinear structural equation models."""

from .data import BasisSpec, Dag, Dataset, compute_ranks, expand_basis, jitter_ties, read_csv, write_csv
from .hsic import HsicConfig, gram_gaussian, hsic_biased, hsic_statistic
from .ordering import (
    CausalOrdering,
    OrderConfig,
    SinkStep,
    estimate_ordering,
    node_residuals,
    ordering_error,
    sink_scores,
)
from .rankg import (
    FitOptions,
    PrlFit,
    TransformEstimate,
    estimate_h_gauss,
    fit_prl,
    prl_gradient,
    prl_objective,
    residuals_gauss,
)
from .ranks import (
    QTransformEstimate,
    SmoothedFit,
    estimate_h_smoothed,
    fit_smoothed,
    q_objective,
    residuals_smoothed,
    smoothed_gradient,
    smoothed_objective,
)
from .simulation import (
    ExperimentSpec,
    NoiseDistribution,
    SemSpec,
    generate_sem_data,
    run_experiment,
    run_regression_study,
    sample_dag,
)

__version__ = "0.1.0"
