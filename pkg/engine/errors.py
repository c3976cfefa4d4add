"""
Error types raised by ParaSurf components.

Every numerical failure has its own class so that the orchestrator can report
the inner error by name.
"""


class ParaSurfError(Exception):
    """Base class for all ParaSurf errors."""


class ConfigError(ParaSurfError):
    """Invalid or inconsistent experiment configuration."""


# surface

class ParseError(ParaSurfError):
    """Malformed OrigamiSpec text."""


class NotAPermutation(ParaSurfError):
    """A gluing array is not a permutation of {1..n}."""


class GaussBonnetMismatch(ParaSurfError):
    """Cone data and Euler characteristic disagree."""


class HitsSingularity(ParaSurfError):
    """A traced trajectory passes too close to a cone point."""


# spectral

class BasisUnavailable(ParaSurfError):
    """An operation needs the Friedrichs eigenbasis but none was built."""


class SolverFailure(ParaSurfError):
    """The sparse eigensolver did not converge."""


class ShapeMismatch(ParaSurfError):
    """Matrix symbol and field shapes are incompatible."""


class NoConvergence(ParaSurfError):
    """An iterative scheme did not reach its tolerance."""


# cohomology

class SmallDivisor(ParaSurfError):
    """A Fourier mode present in the data is (near) resonant with the direction."""


class NoSpectralGap(ParaSurfError):
    """Singular values show no clear separation at the requested threshold."""

    def __init__(self, message: str, spectrum=None):
        super().__init__(message)
        self.spectrum = spectrum


class InsufficientRegularity(ParaSurfError):
    """Sobolev order too small for the requested vanishing order."""


class NonZeroAverage(ParaSurfError):
    """A sample that must have zero average does not."""


# dynamics

class EvaluationAtSingularity(ParaSurfError):
    """A Hamiltonian was evaluated at a cone point outside its mask."""


class IllConditioned(ParaSurfError):
    """Du^t Du is too close to singular to invert."""


# solver

class ContractionRegimeViolated(ParaSurfError):
    """Para-product inverses are outside their Neumann-series regime."""


class SmallnessGateFailed(ParaSurfError):
    """The perturbation is too large for the fixed-point iteration."""


class RankDeficient(ParaSurfError):
    """Correction directions do not span the obstruction range."""


# cli

class MissingArtifacts(ParaSurfError):
    """A run directory lacks the files a report needs."""
