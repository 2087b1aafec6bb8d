"""Exception taxonomy shared across the package.

Domain and configuration mistakes raise ``ValueError`` subclasses so that
callers can catch bad inputs separately from numeric trouble, which raises
``RuntimeError`` subclasses.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedFamilyError(DomainError):
    """The requested family does not support this operation."""


class ConfigError(ValueError):
    """Invalid run configuration (CLI flags, config file, study grid)."""


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


class NumericError(RuntimeError):
    """An iterative routine failed to converge to its stated tolerance."""


class FitError(RuntimeError):
    """A curve or likelihood fit could not be carried out."""


class DegenerateCurveError(FitError):
    """A survival curve carries too little information to fit a marginal."""


class LikelihoodError(FitError):
    """The likelihood is unusable at or around the requested parameters."""


class MomentError(RuntimeError):
    """Sample moments are undefined for the given records."""


class WeightError(MomentError):
    """Bootstrap weight estimation failed on too many replicates."""


class EstimationError(RuntimeError):
    """The two-stage estimator could not produce a usable report."""


class InferenceError(RuntimeError):
    """Bootstrap or Monte-Carlo aggregation failed."""
