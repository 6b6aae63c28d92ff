"""Exception hierarchy shared by the library and the CLI."""


class DecompoundError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(DecompoundError, ValueError):
    """Invalid model, hyperparameters or incompatible inputs."""


class AssumptionViolation(ConfigurationError):
    """The model violates a structural assumption (origin atom, mass condition)."""


class EstimateRefused(DecompoundError):
    """The spectral estimate cannot be computed reliably for this sample."""


class BranchAmbiguity(EstimateRefused):
    """|phi_n| fell below the safety threshold somewhere on the frequency grid."""


class PhaseJump(EstimateRefused):
    """Successive ECF values differ too much for phase unwrapping to be trusted."""


class SymmetryViolation(EstimateRefused):
    """The imaginary part of a spectral integral is not negligible."""


class DivisionByNearZero(EstimateRefused):
    """A rescaled estimator or test statistic would divide by ~0."""


class KernelDegenerate(ConfigurationError):
    """The kernel constant c = 2 (int_0^1 K - K(1)) is numerically zero."""


class IndexOutOfWindow(ConfigurationError):
    """Requested atom index lies outside the estimation window."""


class UnsupportedWeight(ConfigurationError):
    """Weight function outside the closed covariance catalog."""


class NonzeroDrift(ConfigurationError):
    """Operation is defined only in the zero-drift frame."""


class NotPSD(DecompoundError):
    """Covariance matrix is not positive semidefinite even after jitter."""


class TooManyRefusals(DecompoundError):
    """More than the allowed fraction of Monte Carlo replicates was refused."""
