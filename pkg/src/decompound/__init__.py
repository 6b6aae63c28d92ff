"""Spectral inference for discretely observed compound Poisson processes."""

from .errors import (
    AssumptionViolation,
    BranchAmbiguity,
    ConfigurationError,
    DecompoundError,
    EstimateRefused,
    PhaseJump,
)
from .estimators import EstimateSet, SpectralFit, estimate_all, naive_lambda
from .measure import SignedMeasure, conv_exp, convolve, cumulative, reflect
from .model import ACDensity, IncrementSample, LevyTriple, char_fn, simulate, true_F, true_N
from .oracle import CovarianceReport, WeightSpec, covariance_functional, covariance_report, limit_laws
from .spectral import KernelSpec, SpectralConfig

__all__ = [
    "AssumptionViolation",
    "BranchAmbiguity",
    "ConfigurationError",
    "DecompoundError",
    "EstimateRefused",
    "PhaseJump",
    "EstimateSet",
    "SpectralFit",
    "estimate_all",
    "naive_lambda",
    "SignedMeasure",
    "conv_exp",
    "convolve",
    "cumulative",
    "reflect",
    "ACDensity",
    "IncrementSample",
    "LevyTriple",
    "char_fn",
    "simulate",
    "true_F",
    "true_N",
    "CovarianceReport",
    "WeightSpec",
    "covariance_functional",
    "covariance_report",
    "limit_laws",
    "KernelSpec",
    "SpectralConfig",
]
