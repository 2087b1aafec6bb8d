"""Bivariate copulas used to couple an event time with its censoring time.

Implements the Normal copula plus the Clayton, Gumbel and Frank Archimedean
families (and the independence copula as the Archimedean limit).  Every
operation is vectorized over numpy arrays and validated against its
mathematical domain.  Partial derivatives clamp their arguments to
``[CLAMP_EPS, 1 - CLAMP_EPS]`` because likelihood and curve evaluations
routinely land exactly on the boundary of the unit square.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect
from scipy.special import ndtr, ndtri, owens_t

from .errors import DomainError, NumericError, UnsupportedFamilyError

# Boundary clamp for partial derivatives and conditional quantities.
CLAMP_EPS = 1e-12

# Kendall tau ranges accepted when solving for a copula parameter.  The
# Archimedean families here only model positive association; negative
# dependence is handled upstream by a decreasing transform of one margin.
TAU_MAX = 0.95
FRANK_THETA_BRACKET = (1e-6, 100.0)

_HALF_PI = 0.5 * math.pi
_SQRT2 = math.sqrt(2.0)


class CopulaFamily(str, enum.Enum):
    NORMAL = "normal"
    CLAYTON = "clayton"
    GUMBEL = "gumbel"
    FRANK = "frank"
    INDEPENDENCE = "independence"


ARCHIMEDEAN_FAMILIES = frozenset(
    {CopulaFamily.CLAYTON, CopulaFamily.GUMBEL, CopulaFamily.FRANK, CopulaFamily.INDEPENDENCE}
)


def _validate_param(family: CopulaFamily, param: float | None) -> None:
    if family is CopulaFamily.INDEPENDENCE:
        if param is not None:
            raise DomainError("independence copula takes no parameter")
        return
    if param is None or not math.isfinite(param):
        raise DomainError(f"{family.value} copula requires a finite parameter")
    if family is CopulaFamily.NORMAL and not -1.0 < param < 1.0:
        raise DomainError(f"normal copula parameter must lie in (-1, 1), got {param}")
    if family is CopulaFamily.CLAYTON and param <= 0.0:
        raise DomainError(f"clayton copula parameter must be positive, got {param}")
    if family is CopulaFamily.GUMBEL and param < 1.0:
        raise DomainError(f"gumbel copula parameter must be >= 1, got {param}")
    if family is CopulaFamily.FRANK and param == 0.0:
        raise DomainError("frank copula parameter must be nonzero")


@dataclasses.dataclass(frozen=True)
class CopulaSpec:
    """A copula family together with its single dependence parameter.

    Parameters
    ----------
    family : CopulaFamily
        One of normal, clayton, gumbel, frank, independence.
    param : float or None
        Dependence parameter; must be ``None`` for independence.
    """

    family: CopulaFamily
    param: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", CopulaFamily(self.family))
        if self.param is not None:
            object.__setattr__(self, "param", float(self.param))
        _validate_param(self.family, self.param)

    # ------------------------------------------------------------------
    # CDF and partial derivatives
    # ------------------------------------------------------------------

    def cdf(self, u, v):
        """C(u, v) for u, v in [0, 1], elementwise on arrays."""
        u, v, scalar = _as_unit(u, v, closed=True)
        if self.family is CopulaFamily.INDEPENDENCE:
            out = u * v
        elif self.family is CopulaFamily.NORMAL:
            out = _normal_cdf(u, v, self.param)
        elif self.family is CopulaFamily.CLAYTON:
            out = _clayton_cdf(u, v, self.param)
        elif self.family is CopulaFamily.GUMBEL:
            out = _gumbel_cdf(u, v, self.param)
        else:
            out = _frank_cdf(u, v, self.param)
        # Boundary identities hold exactly regardless of the family.
        out = np.where((u == 0.0) | (v == 0.0), 0.0, out)
        out = np.where(u == 1.0, v, np.where(v == 1.0, u, out))
        out = np.clip(out, 0.0, 1.0)
        return float(out) if scalar else out

    def partial_u(self, u, v):
        """dC/du, the conditional distribution of V given U = u."""
        u, v, scalar = _as_unit(u, v, closed=True)
        u = np.clip(u, CLAMP_EPS, 1.0 - CLAMP_EPS)
        v = np.clip(v, CLAMP_EPS, 1.0 - CLAMP_EPS)
        if self.family is CopulaFamily.INDEPENDENCE:
            out = v + np.zeros_like(u)
        elif self.family is CopulaFamily.NORMAL:
            r = self.param
            out = ndtr((ndtri(v) - r * ndtri(u)) / math.sqrt(1.0 - r * r))
        elif self.family is CopulaFamily.CLAYTON:
            out = _clayton_partial(u, v, self.param)
        elif self.family is CopulaFamily.GUMBEL:
            out = _gumbel_partial(u, v, self.param)
        else:
            out = _frank_partial(u, v, self.param)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if scalar else out

    def partial_v(self, u, v):
        """dC/dv; equals partial_u with the arguments swapped (all five
        families are exchangeable)."""
        return self.partial_u(v, u)

    # ------------------------------------------------------------------
    # Conditional sampling
    # ------------------------------------------------------------------

    def conditional_inverse(self, u, w):
        """Solve partial_u(u, v) = w for v.

        Closed forms exist for every family except Gumbel, which falls back
        to monotone bisection.  The returned v satisfies
        ``|partial_u(u, v) - w| <= 1e-10`` wherever float64 spacing of v
        allows a root that sharp (everywhere except the far corners).
        """
        u, w, scalar = _as_unit(u, w, closed=False)
        if self.family is CopulaFamily.INDEPENDENCE:
            out = w + np.zeros_like(u)
        elif self.family is CopulaFamily.NORMAL:
            r = self.param
            out = ndtr(r * ndtri(u) + math.sqrt(1.0 - r * r) * ndtri(w))
        elif self.family is CopulaFamily.CLAYTON:
            th = self.param
            out = (np.power(u, -th) * (np.power(w, -th / (1.0 + th)) - 1.0) + 1.0) ** (-1.0 / th)
        elif self.family is CopulaFamily.FRANK:
            th = self.param
            emu = np.exp(-th * u)
            out = -np.log1p(w * math.expm1(-th) / (emu * (1.0 - w) + w)) / th
        else:
            out = _gumbel_conditional_inverse(u, w, self.param)
        out = np.clip(out, CLAMP_EPS, 1.0 - CLAMP_EPS)
        return float(out) if scalar else out

    # ------------------------------------------------------------------
    # Archimedean generator
    # ------------------------------------------------------------------

    def generator(self, t):
        """Archimedean generator phi(t), strictly decreasing with phi(1) = 0.

        ``t = 0`` maps to ``inf``.  Raises for the Normal family, which is
        not Archimedean.
        """
        fam = self.family
        if fam not in ARCHIMEDEAN_FAMILIES:
            raise UnsupportedFamilyError(f"{fam.value} copula has no Archimedean generator")
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        if np.any((t < 0.0) | (t > 1.0)):
            raise DomainError("generator argument must lie in [0, 1]")
        with np.errstate(divide="ignore"):
            if fam is CopulaFamily.INDEPENDENCE:
                out = -np.log(t)
            elif fam is CopulaFamily.CLAYTON:
                out = (np.power(t, -self.param) - 1.0) / self.param
            elif fam is CopulaFamily.GUMBEL:
                out = np.power(-np.log(t), self.param)
            else:
                th = self.param
                out = -np.log(np.expm1(-th * t) / math.expm1(-th))
        return float(out) if scalar else out

    def generator_inverse(self, s):
        """Inverse of the generator; accepts s in [0, inf]."""
        fam = self.family
        if fam not in ARCHIMEDEAN_FAMILIES:
            raise UnsupportedFamilyError(f"{fam.value} copula has no Archimedean generator")
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        if np.any(s < 0.0) or np.any(np.isnan(s)):
            raise DomainError("generator inverse argument must be nonnegative")
        if fam is CopulaFamily.INDEPENDENCE:
            out = np.exp(-s)
        elif fam is CopulaFamily.CLAYTON:
            out = np.power(1.0 + self.param * s, -1.0 / self.param)
        elif fam is CopulaFamily.GUMBEL:
            out = np.exp(-np.power(s, 1.0 / self.param))
        else:
            th = self.param
            out = -np.log1p(np.exp(-s) * math.expm1(-th)) / th
        out = np.clip(out, 0.0, 1.0)
        return float(out) if scalar else out

    # ------------------------------------------------------------------
    # Kendall tau
    # ------------------------------------------------------------------

    def tau(self) -> float:
        """Population Kendall tau implied by the parameter."""
        fam = self.family
        if fam is CopulaFamily.INDEPENDENCE:
            return 0.0
        th = self.param
        if fam is CopulaFamily.NORMAL:
            return 2.0 * math.asin(th) / math.pi
        if fam is CopulaFamily.CLAYTON:
            return th / (th + 2.0)
        if fam is CopulaFamily.GUMBEL:
            return (th - 1.0) / th
        return 1.0 - 4.0 / th * (1.0 - _debye1(th))


def param_from_tau(family: CopulaFamily | str, tau: float) -> CopulaSpec:
    """Build the copula spec whose population Kendall tau equals ``tau``.

    ``tau = 0`` returns the independence copula for every family.  The
    Archimedean families accept tau in (0, 0.95]; the Normal family accepts
    tau in (-0.95, 0.95).  The Frank parameter is found by bisection on
    theta in [1e-6, 100] to an absolute tolerance of 1e-10.
    """
    family = CopulaFamily(family)
    if not math.isfinite(tau):
        raise DomainError("tau must be finite")
    if tau == 0.0:
        return CopulaSpec(CopulaFamily.INDEPENDENCE)
    if family is CopulaFamily.NORMAL:
        if not -TAU_MAX < tau < TAU_MAX:
            raise DomainError(f"normal copula requires |tau| < {TAU_MAX}, got {tau}")
        return CopulaSpec(family, math.sin(_HALF_PI * tau))
    if family is CopulaFamily.INDEPENDENCE:
        raise DomainError("independence copula only matches tau = 0")
    if not 0.0 < tau <= TAU_MAX:
        raise DomainError(f"{family.value} copula requires tau in (0, {TAU_MAX}], got {tau}")
    if family is CopulaFamily.CLAYTON:
        return CopulaSpec(family, 2.0 * tau / (1.0 - tau))
    if family is CopulaFamily.GUMBEL:
        return CopulaSpec(family, 1.0 / (1.0 - tau))
    lo, hi = FRANK_THETA_BRACKET
    f = lambda th: CopulaSpec(CopulaFamily.FRANK, th).tau() - tau
    if f(hi) < 0.0:
        raise DomainError(f"frank tau {tau} not reachable with theta <= {hi}")
    theta = bisect(f, lo, hi, xtol=1e-10)
    return CopulaSpec(family, float(theta))


# ----------------------------------------------------------------------
# Family-specific kernels
# ----------------------------------------------------------------------


def bvn_cdf(h, k, rho: float):
    """Standard bivariate normal CDF P(Z1 <= h, Z2 <= k) at correlation rho.

    Uses Owen's T-function representation, which is deterministic and
    accurate to well below 1e-7 in absolute terms.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    r = math.sqrt(max(1.0 - rho * rho, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = np.where(h != 0.0, (k - rho * h) / (h * r), np.sign(k) * np.inf)
        ak = np.where(k != 0.0, (h - rho * k) / (k * r), np.sign(h) * np.inf)
    # T(x, a) with a = +-inf contributes +-Phi(-|x|)/2 via the owens_t limit.
    beta = np.where((h * k > 0.0) | ((h * k == 0.0) & (h + k >= 0.0)), 0.0, 0.5)
    out = 0.5 * (ndtr(h) + ndtr(k)) - owens_t(h, ah) - owens_t(k, ak) - beta
    both_zero = (h == 0.0) & (k == 0.0)
    if np.any(both_zero):
        out = np.where(both_zero, 0.25 + math.asin(rho) / (2.0 * math.pi), out)
    return out


def _normal_cdf(u, v, rho):
    interior = (u > 0.0) & (u < 1.0) & (v > 0.0) & (v < 1.0)
    us = np.where(interior, u, 0.5)
    vs = np.where(interior, v, 0.5)
    return np.where(interior, bvn_cdf(ndtri(us), ndtri(vs), rho), 0.0)


def _clayton_cdf(u, v, th):
    # log-space evaluation keeps u**-theta from overflowing for small u.
    with np.errstate(divide="ignore", invalid="ignore"):
        a = -th * np.log(u)
        b = -th * np.log(v)
        lse = np.logaddexp(a, b)
        log_sum = lse + np.log1p(-np.exp(-lse))  # log(u**-th + v**-th - 1)
        return np.exp(-log_sum / th)


def _clayton_partial(u, v, th):
    a = -th * np.log(u)
    b = -th * np.log(v)
    lse = np.logaddexp(a, b)
    log_sum = lse + np.log1p(-np.exp(-lse))
    return np.exp(-(th + 1.0) * np.log(u) - (1.0 + 1.0 / th) * log_sum)


def _gumbel_cdf(u, v, th):
    with np.errstate(divide="ignore", invalid="ignore"):
        x = -np.log(u)
        y = -np.log(v)
        return np.exp(-np.power(np.power(x, th) + np.power(y, th), 1.0 / th))


def _gumbel_partial(u, v, th):
    x = -np.log(u)
    y = -np.log(v)
    s = np.power(x, th) + np.power(y, th)
    g = np.power(s, 1.0 / th)
    return np.exp(-g + (1.0 / th - 1.0) * np.log(s) + (th - 1.0) * np.log(x) - np.log(u))


def _frank_cdf(u, v, th):
    with np.errstate(over="ignore"):
        num = np.expm1(-th * u) * np.expm1(-th * v) / math.expm1(-th)
        return -np.log1p(num) / th


def _frank_partial(u, v, th):
    # Expanded denominator avoids the cancellation of the leading 1 terms.
    num = np.exp(-th * u) * np.expm1(-th * v)
    den = math.exp(-th) + np.exp(-th * (u + v)) - np.exp(-th * u) - np.exp(-th * v)
    return num / den


def _gumbel_conditional_inverse(u, w, th, tol=1e-10, max_iter=200):
    # Bisect on r = log(-log v) rather than on v itself: near extreme u
    # the conditional density in v spikes like 1/u, so in v-space no
    # representable point meets the residual tolerance, while in r the
    # curve stays well scaled over the whole square.  h(r) is decreasing.
    lo = np.full_like(u, math.log(CLAMP_EPS))   # v = 1 - 1e-12
    hi = np.full_like(u, math.log(700.0))       # v = exp(-700), above denormals
    h = lambda r: _gumbel_partial(u, np.exp(-np.exp(r)), th)
    # Convergence: residual within tol, or bracket collapsed to adjacent
    # floats (mid is then the best representable root; at corners where
    # both u and v sit within ~1e-7 of 1, quantization of v alone moves
    # h by more than tol, so a pure residual test would never pass).
    converged = lambda r, width: np.isfinite(r) and (r <= tol or width <= 1e-12)
    mid = 0.5 * (lo + hi)
    for i in range(max_iter):
        mid = 0.5 * (lo + hi)
        past_root = h(mid) < w
        hi = np.where(past_root, mid, hi)
        lo = np.where(past_root, lo, mid)
        if i >= 64 and i % 8 == 0:
            if converged(np.max(np.abs(h(mid) - w)), np.max(hi - lo)):
                break
    else:
        if not converged(np.max(np.abs(h(mid) - w)), np.max(hi - lo)):
            raise NumericError(
                f"gumbel conditional inverse did not reach {tol:g} in {max_iter} bisection steps"
            )
    return np.exp(-np.exp(mid))


def _debye1(theta: float) -> float:
    """Order-1 Debye function D1 by adaptive quadrature."""
    integrand = lambda t: t / math.expm1(t) if t != 0.0 else 1.0
    val, _ = quad(integrand, 0.0, theta, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val / theta


def _as_unit(a, b, closed: bool):
    """Validate a pair of unit-interval arguments, broadcasting them."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scalar = a.ndim == 0 and b.ndim == 0
    a, b = np.broadcast_arrays(a, b)
    if closed:
        bad = (a < 0.0) | (a > 1.0) | (b < 0.0) | (b > 1.0)
    else:
        bad = (a <= 0.0) | (a >= 1.0) | (b <= 0.0) | (b >= 1.0)
    if np.any(bad | np.isnan(a) | np.isnan(b)):
        kind = "[0, 1]" if closed else "(0, 1)"
        raise DomainError(f"arguments must lie in {kind}")
    return a, b, scalar
