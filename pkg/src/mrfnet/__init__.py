"""Sparse auto-model Markov random field networks estimated from partially observed samples."""
from .errors import CapacityError, ConfigError, MrfError, NumericalError, PreconditionError, SamplerTimeoutError
from .estimator import FitOptions, FitResult, fit, lambda_default, objective, pseudo_loglik, pseudo_loglik_grad
from .experiment import ExperimentConfig, MetricsReport, generate_truth, run_experiment, sample_size
from .metrics import (
    PartitionedTruth,
    StructureStats,
    a2_eigen_proxies,
    conditional_kl,
    rate_r_n,
    relative_mse,
    shifted_objective,
    structure_stats,
    support_metrics,
    tau_ratio,
)
from .model import (
    Alphabet,
    Dataset,
    InteractionSpec,
    PenaltyConfig,
    SymmetricNetwork,
    auto_binomial_spec,
    auto_logistic_spec,
    conditional_distribution,
    enumerate_joint,
    joint_log_pmf,
    log_conditional_normalizer,
    penalty,
    validate_spec,
)
from .report import emit_report
from .sampler import SamplerConfig, drop_nodes, gibbs_sweep, sample_cftp, sample_dataset

__version__ = "0.1.0"
