"""Estimate the dependence between an event time and the censoring time
that hides it, from singly observed survival data.

The observable per subject is ``(x, delta)`` with ``x = min(t, c)`` and
``delta = 1{t <= c}``.  Under a working copula for ``(T, C)`` and
parametric marginals, :func:`estimate` recovers Kendall's tau (and the
marginal parameters) by matching five summary moments of the censored
sample, with a simulated-annealing global search bagged over bootstrap
replicates.  :func:`mle_fit` provides the likelihood-based baseline,
:func:`bootstrap_tau` the resampling inference, and
:func:`monte_carlo_study` the replication harness.
"""

from .cg import FeasibleRegion, SurvivalCurve, cg_survival, feasible_region
from .copulas import (
    ARCHIMEDEAN_FAMILIES,
    CopulaFamily,
    CopulaSpec,
    bvn_cdf,
    param_from_tau,
)
from .datagen import (
    GenConfig,
    RctEffects,
    RctRecord,
    SurvivalData,
    SurvivalRecord,
    censor,
    sample_pairs,
    sample_rct,
    sample_survival_data,
)
from .errors import (
    ConfigError,
    DegenerateCurveError,
    DomainError,
    EstimationError,
    FitError,
    InferenceError,
    LikelihoodError,
    MomentError,
    NumericError,
    ParseError,
    UnsupportedFamilyError,
    WeightError,
)
from .estimator import (
    CANONICAL_TAU_RANGES,
    EstimateOptions,
    EstimateReport,
    ProposedEstimator,
    TauRange,
    VoteTally,
    anneal,
    estimate,
)
from .inference import (
    BootstrapSummary,
    StudyCell,
    StudyRunRecord,
    StudySummary,
    bootstrap_tau,
    monte_carlo_study,
    percentile_interval,
)
from .io import (
    read_survival_csv,
    write_curve_csv,
    write_json_report,
    write_study_csv,
    write_survival_csv,
)
from .marginals import (
    MarginalFamily,
    MarginalSpec,
    fit_survival_curve,
    spec_from_vector,
)
from .mle import MleFit, MleTauEstimator, censored_marginal_mle, composite_log_likelihood, mle_fit
from .moments import (
    McMomentEngine,
    MomentVector,
    ThetaVector,
    WeightMatrix,
    closed_form_moments,
    objective,
    sample_moments,
    theoretical_moments_mc,
    weight_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ARCHIMEDEAN_FAMILIES",
    "BootstrapSummary",
    "CANONICAL_TAU_RANGES",
    "ConfigError",
    "CopulaFamily",
    "CopulaSpec",
    "DegenerateCurveError",
    "DomainError",
    "EstimateOptions",
    "EstimateReport",
    "EstimationError",
    "FeasibleRegion",
    "FitError",
    "GenConfig",
    "InferenceError",
    "LikelihoodError",
    "MarginalFamily",
    "MarginalSpec",
    "McMomentEngine",
    "MleFit",
    "MleTauEstimator",
    "MomentError",
    "MomentVector",
    "NumericError",
    "ParseError",
    "ProposedEstimator",
    "RctEffects",
    "RctRecord",
    "StudyCell",
    "StudyRunRecord",
    "StudySummary",
    "SurvivalCurve",
    "SurvivalData",
    "SurvivalRecord",
    "TauRange",
    "ThetaVector",
    "UnsupportedFamilyError",
    "VoteTally",
    "WeightError",
    "WeightMatrix",
    "anneal",
    "bootstrap_tau",
    "bvn_cdf",
    "censor",
    "censored_marginal_mle",
    "cg_survival",
    "closed_form_moments",
    "composite_log_likelihood",
    "estimate",
    "feasible_region",
    "fit_survival_curve",
    "mle_fit",
    "monte_carlo_study",
    "objective",
    "param_from_tau",
    "percentile_interval",
    "read_survival_csv",
    "sample_moments",
    "sample_pairs",
    "sample_rct",
    "sample_survival_data",
    "spec_from_vector",
    "theoretical_moments_mc",
    "weight_matrix",
    "write_curve_csv",
    "write_json_report",
    "write_study_csv",
    "write_survival_csv",
    "__version__",
]
