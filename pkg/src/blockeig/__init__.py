"""Minimal spectral-norm perturbation of one diagonal block so that a block
matrix acquires prescribed eigenvalues."""

from .matrix_core import PermutationSpec, SVDError, pinv, singular_values, spectral_norm, svd
from .objective import OptimizerConfig, check_stationarity, eval_objective, maximize, sweep_slice
from .perturbation import PerturbationResult, SolveCertificate, verify_membership
from .solve import CertificateChecks, SharpPointWarning, SolveRequest, solve
from .structured import GammaPoint, InstanceError, ProblemInstance, SkEvaluator, kappa_index, to_southeast

__version__ = "0.1.0"

__all__ = [
    "CertificateChecks",
    "GammaPoint",
    "InstanceError",
    "OptimizerConfig",
    "PermutationSpec",
    "PerturbationResult",
    "ProblemInstance",
    "SVDError",
    "SharpPointWarning",
    "SkEvaluator",
    "SolveCertificate",
    "SolveRequest",
    "check_stationarity",
    "eval_objective",
    "kappa_index",
    "maximize",
    "pinv",
    "singular_values",
    "solve",
    "spectral_norm",
    "svd",
    "sweep_slice",
    "to_southeast",
    "verify_membership",
]
