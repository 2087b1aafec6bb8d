"""Parametric marginal survival models for event and censoring times.

Three families are supported: exponential, Weibull and log-normal.  The
Weibull survival function is parameterized as ``S(t) = exp(-lam * t**alpha)``
with shape ``alpha`` and scale ``lam``; the scale multiplies ``t**alpha``
directly rather than entering as ``(lam * t)**alpha``.  The log-normal family
is parameterized by the mean and standard deviation of log-time.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np
from scipy.optimize import least_squares
from scipy.special import ndtr, ndtri

from .errors import DegenerateCurveError, DomainError, FitError

# Positivity floor applied to fitted scale/shape parameters.
PARAM_FLOOR = 1e-8


class MarginalFamily(str, enum.Enum):
    EXPONENTIAL = "exponential"
    WEIBULL = "weibull"
    LOGNORMAL = "lognormal"


_N_PARAMS = {
    MarginalFamily.EXPONENTIAL: 1,
    MarginalFamily.WEIBULL: 2,
    MarginalFamily.LOGNORMAL: 2,
}


@dataclasses.dataclass(frozen=True)
class MarginalSpec:
    """A marginal family with its parameter tuple.

    Parameter order: exponential ``(rate,)``; Weibull ``(shape, scale)``;
    log-normal ``(mu, sigma)`` where sigma is the standard deviation of
    log-time.
    """

    family: MarginalFamily
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "family", MarginalFamily(self.family))
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != _N_PARAMS[self.family]:
            raise DomainError(
                f"{self.family.value} takes {_N_PARAMS[self.family]} parameters, got {len(params)}"
            )
        if any(not math.isfinite(p) for p in params):
            raise DomainError("marginal parameters must be finite")
        if self.family is MarginalFamily.LOGNORMAL:
            if params[1] <= 0.0:
                raise DomainError("log-normal sigma must be positive")
        elif any(p <= 0.0 for p in params):
            raise DomainError(f"{self.family.value} parameters must be positive")

    # ------------------------------------------------------------------

    def survival(self, t):
        """S(t) = P(T > t) for t >= 0."""
        t, scalar = _as_time(t)
        if self.family is MarginalFamily.EXPONENTIAL:
            out = np.exp(-self.params[0] * t)
        elif self.family is MarginalFamily.WEIBULL:
            a, lam = self.params
            with np.errstate(over="ignore"):
                out = np.exp(-lam * np.power(t, a))
        else:
            mu, sig = self.params
            with np.errstate(divide="ignore"):
                out = ndtr(-(np.log(t) - mu) / sig)
        return float(out) if scalar else out

    def cdf(self, t):
        t, scalar = _as_time(t)
        if self.family is MarginalFamily.LOGNORMAL:
            mu, sig = self.params
            with np.errstate(divide="ignore"):
                out = ndtr((np.log(t) - mu) / sig)
        else:
            out = 1.0 - self.survival(t)
        return float(out) if scalar else out

    def pdf(self, t):
        """Density f(t); the Weibull hazard is ``lam * alpha * t**(alpha-1)``."""
        t, scalar = _as_time(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.family is MarginalFamily.EXPONENTIAL:
                lam = self.params[0]
                out = lam * np.exp(-lam * t)
            elif self.family is MarginalFamily.WEIBULL:
                a, lam = self.params
                out = lam * a * np.power(t, a - 1.0) * np.exp(-lam * np.power(t, a))
                # t**a overflow makes inf * 0; the true limit of the
                # density there is zero.
                out = np.where(np.isnan(out), 0.0, out)
            else:
                mu, sig = self.params
                z = (np.log(t) - mu) / sig
                out = np.exp(-0.5 * z * z) / (t * sig * math.sqrt(2.0 * math.pi))
        out = np.where(t == 0.0, _pdf_at_zero(self), out)
        return float(out) if scalar else out

    def inverse_survival(self, u):
        """Time t with S(t) = u, for u in (0, 1]."""
        u, scalar = _as_prob(u)
        if self.family is MarginalFamily.EXPONENTIAL:
            out = -np.log(u) / self.params[0]
        elif self.family is MarginalFamily.WEIBULL:
            a, lam = self.params
            out = np.power(-np.log(u) / lam, 1.0 / a)
        else:
            mu, sig = self.params
            out = np.exp(mu + sig * ndtri(1.0 - u))
        return float(out) if scalar else out

    # Vector view used by the optimizer and the feasible region.  The
    # log-normal is exposed as (mu, sigma**2) so that box bounds act on the
    # variance of log-time.

    def param_vector(self) -> np.ndarray:
        if self.family is MarginalFamily.LOGNORMAL:
            mu, sig = self.params
            return np.array([mu, sig * sig])
        return np.array(self.params)


def spec_from_vector(family: MarginalFamily | str, vec) -> MarginalSpec:
    """Inverse of ``MarginalSpec.param_vector``."""
    family = MarginalFamily(family)
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (_N_PARAMS[family],):
        raise DomainError(f"{family.value} expects {_N_PARAMS[family]} vector entries")
    if family is MarginalFamily.LOGNORMAL:
        if vec[1] <= 0.0:
            raise DomainError("log-normal variance must be positive")
        return MarginalSpec(family, (float(vec[0]), float(math.sqrt(vec[1]))))
    return MarginalSpec(family, tuple(float(p) for p in vec))


def n_params(family: MarginalFamily | str) -> int:
    return _N_PARAMS[MarginalFamily(family)]


def _pdf_at_zero(spec: MarginalSpec) -> float:
    if spec.family is MarginalFamily.EXPONENTIAL:
        return spec.params[0]
    if spec.family is MarginalFamily.WEIBULL:
        a, lam = spec.params
        if a > 1.0:
            return 0.0
        if a == 1.0:
            return lam
        return math.inf
    return 0.0


# ----------------------------------------------------------------------
# Least-squares fit to a survival curve
# ----------------------------------------------------------------------


def fit_survival_curve(times, survival, family: MarginalFamily | str) -> MarginalSpec:
    """Fit a marginal family to survival-curve points by least squares.

    The residuals are taken on the survival scale.  Starting values follow
    the usual conventions: ``mu = 0, sigma = 1`` for the log-normal and unit
    rate/shape for the exponential and Weibull.

    Parameters
    ----------
    times, survival : array-like
        Curve points with strictly positive times and survival values in
        (0, 1].  At least three distinct times are required.
    family : MarginalFamily
        Family to fit.

    Returns
    -------
    MarginalSpec
        Fitted marginal; exact curves are recovered to high accuracy.
    """
    family = MarginalFamily(family)
    t = np.asarray(times, dtype=float)
    s = np.asarray(survival, dtype=float)
    if t.shape != s.shape or t.ndim != 1:
        raise DomainError("times and survival must be 1-d arrays of equal length")
    keep = s > 0.0
    t, s = t[keep], s[keep]
    if len(np.unique(t)) < 3:
        raise DegenerateCurveError("need at least 3 distinct curve points with survival > 0")
    if np.any(t <= 0.0) or np.any(s > 1.0):
        raise DomainError("curve requires positive times and survival in (0, 1]")
    if np.ptp(s) < 1e-12:
        raise DegenerateCurveError("survival curve is flat; family parameters are not identified")

    if family is MarginalFamily.EXPONENTIAL:
        x0 = np.array([1.0])
        lo, hi = [PARAM_FLOOR], [np.inf]
        resid = lambda p: np.exp(-p[0] * t) - s
    elif family is MarginalFamily.WEIBULL:
        x0 = np.array([1.0, 1.0])
        lo, hi = [PARAM_FLOOR, PARAM_FLOOR], [np.inf, np.inf]
        resid = lambda p: np.exp(-p[1] * np.power(t, p[0])) - s
    else:
        x0 = np.array([0.0, 1.0])
        lo, hi = [-np.inf, PARAM_FLOOR], [np.inf, np.inf]
        resid = lambda p: ndtr(-(np.log(t) - p[0]) / p[1]) - s

    try:
        res = least_squares(resid, x0=x0, bounds=(lo, hi), xtol=1e-14, ftol=1e-14, gtol=1e-14)
    except Exception as exc:  # pragma: no cover - scipy failures are rare
        raise FitError(f"{family.value} curve fit failed: {exc}") from exc
    if not np.all(np.isfinite(res.x)):
        raise FitError(f"{family.value} curve fit produced non-finite parameters")
    return MarginalSpec(family, tuple(float(p) for p in res.x))


def _as_time(t):
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    if np.any(t < 0.0) or np.any(np.isnan(t)):
        raise DomainError("time must be nonnegative")
    return t, scalar


def _as_prob(u):
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    if np.any((u <= 0.0) | (u > 1.0)):
        raise DomainError("survival probability must lie in (0, 1]")
    return u, scalar
