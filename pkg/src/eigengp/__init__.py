"""Gaussian-process regression with eigenvector inducing variables.

A small library for full GP regression on the line and in moderate
dimension, its optimal rank-m variational approximation built from the
eigenvectors of the kernel matrix, and a reproducible Monte-Carlo harness
that measures the frequentist behaviour (coverage, interval length, RMSE,
NLPD) of pointwise credible intervals.
"""

__version__ = "0.1.0"

from .eigen import (EigenSource, EigenSystem, brownian_eigensystem_closed_form,
                    eigensystem_for, symmetric_eigensystem, truncate)
from .errors import (ArgumentError, ConditioningError, ConfigurationError,
                     ContractViolationError, DomainError, EigenGPError,
                     IngestionError, ReplicateError)
from .experiments import (DesignSpec, ExperimentConfig, GridMethod, MetricsReport,
                          MRule, MRuleKind, NoiseKind, NoiseSpec, ReplicateRecord,
                          SummaryStats, TruthKind, TruthSpec, aggregate,
                          config_from_mapping, generate_dataset, generate_design,
                          load_feature_matrix, replicate_rng, resolve_m, run_grid,
                          run_monte_carlo, run_replicate, run_replicates,
                          truth_value, truth_values)
from .gp import (DEFAULT_SIGMA2_BOUNDS, HyperparameterFit, NoiseEstimate,
                 PosteriorSummary, estimate_noise_variance, fit_hyperparameters,
                 full_posterior_at, log_marginal_likelihood, posterior_at)
from .kernels import (Design, DesignKind, KernelFamily, KernelSpec, MATERN_SMOOTHNESS,
                      ResolvedKernel, kernel_matrix, kernel_value, kernel_vector,
                      regular_grid, resolve_kernel)
from .sgpr import (CredibleInterval, FrequentistDecomposition, credible_interval,
                   frequentist_decomposition, kl_to_full_posterior, rank_gap_vector,
                   sgpr_posterior_at)
from .theory import (KLRegime, Regime, RegimeReport, contraction_exponent,
                     inducing_count, inducing_threshold, kl_regime,
                     predicted_asymptotic_coverage, threshold_base)
