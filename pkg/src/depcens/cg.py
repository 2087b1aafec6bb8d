"""Copula-graphic survival estimation and the feasible parameter region.

The copula-graphic estimator generalizes Kaplan-Meier: given an assumed
Archimedean copula it inverts the generator over a cumulative sum of
at-risk terms, and it reduces exactly to the product-limit estimator under
independence.  Repeated copula-graphic fits at a few representative
dependence levels bound the marginal parameters inside a box that the
global optimization stage searches.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .copulas import ARCHIMEDEAN_FAMILIES, CopulaFamily, CopulaSpec, param_from_tau
from .datagen import SurvivalData
from .errors import DegenerateCurveError, DomainError, FitError, UnsupportedFamilyError
from .marginals import MarginalFamily, MarginalSpec, fit_survival_curve, n_params

REPRESENTATIVE_TAUS = (0.0, 0.3, 0.5, 0.8)
IQR_FENCE = 1.5
# Positivity floor for box bounds on scale-type parameters.
REGION_FLOOR = 1e-6

_PARAM_NAMES = {
    MarginalFamily.EXPONENTIAL: ("rate",),
    MarginalFamily.WEIBULL: ("shape", "scale"),
    MarginalFamily.LOGNORMAL: ("mu", "sigma_sq"),
}
# Which entries of the parameter vector must stay positive.
_POSITIVE = {
    MarginalFamily.EXPONENTIAL: (True,),
    MarginalFamily.WEIBULL: (True, True),
    MarginalFamily.LOGNORMAL: (False, True),
}


@dataclasses.dataclass(frozen=True)
class SurvivalCurve:
    """Step-function survival estimate evaluated at the event times."""

    times: np.ndarray
    survival: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        survival = np.asarray(self.survival, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "survival", survival)
        if times.ndim != 1 or times.shape != survival.shape or len(times) == 0:
            raise DomainError("curve needs matching nonempty time and survival arrays")
        if np.any(np.diff(times) <= 0.0) or np.any(times <= 0.0):
            raise DomainError("curve times must be positive and strictly increasing")
        if np.any(survival < 0.0) or np.any(survival > 1.0) or np.any(np.diff(survival) > 1e-12):
            raise DomainError("survival values must be nonincreasing within [0, 1]")


def cg_survival(data: SurvivalData, copula: CopulaSpec, target: str = "t") -> SurvivalCurve:
    """Copula-graphic survival curve for the event or the censoring margin.

    Parameters
    ----------
    data : SurvivalData
        Observed records.
    copula : CopulaSpec
        Assumed Archimedean (or independence) copula; the Normal family has
        no generator and is rejected.
    target : str
        ``"t"`` estimates the event-time margin, ``"c"`` swaps the roles of
        the indicator and estimates the censoring margin.

    Notes
    -----
    Tied target-event times are handled by processing duplicates in sort
    order, each with its own at-risk count, which is the limit of an
    arbitrarily small jitter of the later duplicate and reproduces the
    Kaplan-Meier tie convention under independence.
    """
    if copula.family not in ARCHIMEDEAN_FAMILIES:
        raise UnsupportedFamilyError(
            f"copula-graphic estimation needs an Archimedean copula, got {copula.family.value}"
        )
    if target not in ("t", "c"):
        raise DomainError("target must be 't' or 'c'")
    d = data.delta if target == "t" else 1 - data.delta
    # Ascending time with target events before the other kind at ties, so
    # that simultaneous non-events stay in the at-risk set.
    order = np.lexsort((1 - d, data.x))
    x = data.x[order]
    d = d[order]
    n = len(x)
    if not np.any(d == 1):
        raise DegenerateCurveError("no target events observed; curve is undefined")
    at_risk = n - np.flatnonzero(d == 1)
    terms = copula.generator((at_risk - 1) / n) - copula.generator(at_risk / n)
    survival = copula.generator_inverse(np.cumsum(terms))
    times = x[d == 1]
    # Collapse tied event times onto the final (lowest) step value.
    last = np.flatnonzero(np.diff(times) > 0.0)
    keep = np.concatenate([last, [len(times) - 1]])
    return SurvivalCurve(times[keep], np.minimum.accumulate(survival[keep]))


@dataclasses.dataclass(frozen=True, eq=False)
class FeasibleRegion:
    """Box bounds for the concatenated marginal parameter vector.

    Layout matches ``ThetaVector.as_vector`` without the trailing tau:
    event-margin parameters first, then censoring-margin parameters, with
    log-normal margins contributing (mu, variance of log-time).
    """

    family_t: MarginalFamily
    family_c: MarginalFamily
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "family_t", MarginalFamily(self.family_t))
        object.__setattr__(self, "family_c", MarginalFamily(self.family_c))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        k = n_params(self.family_t) + n_params(self.family_c)
        if lower.shape != (k,) or upper.shape != (k,):
            raise DomainError(f"region bounds must have {k} entries")
        if np.any(~np.isfinite(lower)) or np.any(~np.isfinite(upper)):
            raise DomainError("region bounds must be finite")
        if np.any(lower >= upper):
            raise DomainError("region lower bounds must lie below upper bounds")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(
            f"{side}_{name}"
            for side, fam in (("t", self.family_t), ("c", self.family_c))
            for name in _PARAM_NAMES[fam]
        )

    def bounds_list(self) -> list[tuple[float, float]]:
        return [(float(lo), float(hi)) for lo, hi in zip(self.lower, self.upper)]

    def contains(self, vec) -> bool:
        vec = np.asarray(vec, dtype=float)
        return bool(np.all(vec >= self.lower) and np.all(vec <= self.upper))

    def clip(self, vec) -> np.ndarray:
        return np.clip(np.asarray(vec, dtype=float), self.lower, self.upper)


def _proxy_copula(tau: float) -> CopulaSpec:
    """Archimedean stand-in at a representative tau.

    Clayton serves the positive side.  Negative taus (mirrored grids for
    the flipped-dependence estimator) go through Frank, whose generator is
    the only one here that extends below zero; its parameter is odd in tau.
    """
    if tau < 0.0:
        spec = param_from_tau(CopulaFamily.FRANK, -tau)
        return CopulaSpec(CopulaFamily.FRANK, -spec.param)
    return param_from_tau(CopulaFamily.CLAYTON, tau)


def feasible_region(
    data: SurvivalData,
    family_t,
    family_c,
    representative_taus=REPRESENTATIVE_TAUS,
    fits_per_tau: int = 200,
    seed=0,
) -> FeasibleRegion:
    """Bound the marginal parameters from copula-graphic fits.

    For each representative tau an Archimedean proxy at that tau
    (independence at zero, Clayton above, Frank below) drives
    copula-graphic curves for both margins on bootstrap resamples of the
    data; the fitted marginal parameters are averaged over
    ``fits_per_tau`` resamples.  Quartile fences ``[Q1 - 1.5 IQR,
    Q3 + 1.5 IQR]`` across the per-tau averages, intersected with
    positivity floors, give the box.  A degenerate IQR widens to +-10% of
    the common value.  The result is invariant to the row order of
    ``data``.
    """
    family_t = MarginalFamily(family_t)
    family_c = MarginalFamily(family_c)
    if fits_per_tau < 1:
        raise DomainError("fits_per_tau must be at least 1")
    taus = tuple(float(t) for t in representative_taus)
    if len(taus) < 2:
        raise DomainError("need at least two representative taus")
    data = data.sorted()
    k_t = n_params(family_t)
    rng = np.random.default_rng(np.random.SeedSequence([_seed_entropy(seed), 11]))
    per_tau = []
    for tau in taus:
        proxy = _proxy_copula(tau)
        vectors = []
        for _ in range(fits_per_tau):
            rep = data.resample(rng)
            try:
                curve_t = cg_survival(rep, proxy, target="t")
                curve_c = cg_survival(rep, proxy, target="c")
                fit_t = fit_survival_curve(curve_t.times, curve_t.survival, family_t)
                fit_c = fit_survival_curve(curve_c.times, curve_c.survival, family_c)
            except (DegenerateCurveError, FitError):
                continue
            vectors.append(
                np.concatenate([fit_t.param_vector(), fit_c.param_vector()])
            )
        if len(vectors) < max(1, fits_per_tau // 2):
            raise FitError(
                f"feasible region: only {len(vectors)} of {fits_per_tau} fits "
                f"succeeded at tau={tau}"
            )
        per_tau.append(np.mean(vectors, axis=0))

    stacked = np.vstack(per_tau)
    q1, q3 = np.percentile(stacked, [25.0, 75.0], axis=0)
    iqr = q3 - q1
    lower = q1 - IQR_FENCE * iqr
    upper = q3 + IQR_FENCE * iqr
    # Degenerate spread: widen to +-10% around the common value.
    center = 0.5 * (q1 + q3)
    flat = iqr < 1e-12
    half = np.where(np.abs(center) > 0.0, 0.1 * np.abs(center), 0.1)
    lower = np.where(flat, center - half, lower)
    upper = np.where(flat, center + half, upper)
    positive = np.array(_POSITIVE[family_t] + _POSITIVE[family_c])
    lower = np.where(positive, np.maximum(lower, REGION_FLOOR), lower)
    upper = np.maximum(upper, lower + REGION_FLOOR)
    return FeasibleRegion(family_t, family_c, lower, upper)


def _seed_entropy(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise DomainError("seed must be an integer")
