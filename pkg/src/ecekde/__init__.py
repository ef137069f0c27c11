"""Kernel density estimators of the calibration error of probabilistic classifiers."""

from .bandwidth import DEFAULT_GRID, loo_log_likelihood, select_bandwidth
from .binned import (
    assign_simplex_bins,
    doane_bins,
    ece_bin_canonical,
    ece_bin_toplabel,
)
from .core import (
    LabeledDataset,
    clamp_interior,
    one_hot,
    sample_labels,
    sample_uniform_simplex,
    temperature_scale,
    validate_simplex,
)
from .debias import (
    compute_moments,
    cond_expectation_debiased,
    debias_ratio_means,
    debias_ratio_squared_means,
)
from .estimators import (
    CalibrationEstimate,
    KdeConfig,
    RegularizationWeights,
    cond_expectation,
    ece_kde_canonical,
    ece_kde_marginal,
    ece_kde_toplabel,
    grad_ece_kde_canonical,
    mse_ce_objective,
    sharpness_at,
    sharpness_partial,
)
from .experiments import (
    SyntheticSpec,
    bootstrap_ci,
    convergence_study,
    debias_study,
    fit_loglog_slope,
    gen_synthetic,
    ground_truth_ce,
)
from .kernels import log_beta_kernel, log_dirichlet_kernel, log_kernel_matrix

__version__ = "0.1.0"
