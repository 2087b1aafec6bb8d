"""Method-of-moments machinery for censored pairs on the log-time scale.

The five matched moments are the event proportion, the mean log follow-up
time within each of the event and censored groups, and the (population
divisor) variance of log follow-up time within each group.  Their
theoretical counterparts come either from closed-form truncated bivariate
normal expressions (log-normal margins coupled by the Normal copula) or
from a common-random-numbers Monte-Carlo engine that works for every
supported family.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import erfcx, log_ndtr, ndtr, ndtri

from .copulas import CLAMP_EPS, CopulaFamily, CopulaSpec, param_from_tau
from .datagen import SurvivalData
from .errors import DomainError, MomentError, UnsupportedFamilyError, WeightError
from .marginals import MarginalFamily, MarginalSpec, n_params, spec_from_vector

# Variance floor applied before inverting bootstrap variances into weights.
WEIGHT_VARIANCE_FLOOR = 1e-10
MIN_MC_DRAWS = 10_000

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_CRN_STREAM = 101


@dataclasses.dataclass(frozen=True)
class MomentVector:
    """Event proportion plus group means/variances of log follow-up time."""

    p: float
    mu1: float
    mu2: float
    var1: float
    var2: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError("event proportion must lie in [0, 1]")
        if self.var1 < 0.0 or self.var2 < 0.0:
            raise DomainError("group variances must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.mu1, self.mu2, self.var1, self.var2])


@dataclasses.dataclass(frozen=True)
class ThetaVector:
    """Marginal specifications for T and C together with Kendall tau."""

    marginal_t: MarginalSpec
    marginal_c: MarginalSpec
    tau: float

    def __post_init__(self):
        if not -1.0 < self.tau < 1.0:
            raise DomainError("tau must lie in (-1, 1)")

    def as_vector(self) -> np.ndarray:
        """Flat layout [params_t..., params_c..., tau]; log-normal margins
        contribute (mu, sigma**2)."""
        return np.concatenate(
            [
                self.marginal_t.param_vector(),
                self.marginal_c.param_vector(),
                [self.tau],
            ]
        )

    @classmethod
    def from_vector(cls, family_t, family_c, vec) -> "ThetaVector":
        vec = np.asarray(vec, dtype=float)
        k = n_params(family_t)
        m = n_params(family_c)
        if vec.shape != (k + m + 1,):
            raise DomainError(f"expected {k + m + 1} entries, got {vec.shape}")
        return cls(
            spec_from_vector(family_t, vec[:k]),
            spec_from_vector(family_c, vec[k : k + m]),
            float(vec[-1]),
        )


@dataclasses.dataclass(frozen=True)
class WeightMatrix:
    """Diagonal GMM weight matrix stored as its five diagonal entries."""

    diag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        object.__setattr__(self, "diag", diag)
        if diag.shape != (5,) or np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
            raise DomainError("weight matrix needs 5 positive finite diagonal entries")


# ----------------------------------------------------------------------
# Sample moments
# ----------------------------------------------------------------------


def sample_moments(data: SurvivalData) -> MomentVector:
    """Five sample moments of the observed records.

    Group variances use the group size as divisor.  Raises ``MomentError``
    unless both the event group and the censored group hold at least two
    records.
    """
    logx = np.log(data.x)
    events = data.delta == 1
    return _moments_from_log(logx, events)


def _moments_from_log(logx, events) -> MomentVector:
    n1 = int(np.count_nonzero(events))
    n0 = len(logx) - n1
    if n1 < 2 or n0 < 2:
        raise MomentError(
            f"moments need >= 2 events and >= 2 censored records, got {n1} and {n0}"
        )
    g1 = logx[events]
    g0 = logx[~events]
    return MomentVector(
        p=n1 / len(logx),
        mu1=float(g1.mean()),
        mu2=float(g0.mean()),
        var1=float(g1.var()),
        var2=float(g0.var()),
    )


def weight_matrix(data: SurvivalData, n_boot: int = 100, seed=0) -> WeightMatrix:
    """Inverse bootstrap-variance weights for the five moments.

    Resamples the records ``n_boot`` times, computes the sample moments of
    each replicate, and inverts the replicate variance of each component
    after flooring it at ``WEIGHT_VARIANCE_FLOOR``.  Replicates whose
    moments are undefined are skipped; more than half skipped raises
    ``WeightError``.
    """
    if n_boot < 2:
        raise DomainError("weight bootstrap needs at least 2 replicates")
    rng = np.random.default_rng(seed)
    logx = np.log(data.x)
    events = data.delta == 1
    n = len(data)
    rows = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, size=n)
        try:
            rows.append(_moments_from_log(logx[idx], events[idx]).as_array())
        except MomentError:
            continue
    if len(rows) <= n_boot // 2:
        raise WeightError(
            f"only {len(rows)} of {n_boot} weight replicates had defined moments"
        )
    var = np.var(np.vstack(rows), axis=0, ddof=1)
    return WeightMatrix(1.0 / np.maximum(var, WEIGHT_VARIANCE_FLOOR))


# ----------------------------------------------------------------------
# Closed-form engine (log-normal margins, Normal copula)
# ----------------------------------------------------------------------


def closed_form_moments(theta: ThetaVector) -> MomentVector:
    """Exact moments under log-normal margins coupled by the Normal copula.

    On the log scale the latent pair is bivariate normal with Pearson
    correlation ``sin(pi * tau / 2)``, so the censored-group and
    event-group moments reduce to one-sided truncated normal expressions.
    Valid for any tau in (-1, 1).
    """
    if (
        theta.marginal_t.family is not MarginalFamily.LOGNORMAL
        or theta.marginal_c.family is not MarginalFamily.LOGNORMAL
    ):
        raise UnsupportedFamilyError("closed-form moments require log-normal margins")
    mu_t, sig_t = theta.marginal_t.params
    mu_c, sig_c = theta.marginal_c.params
    return MomentVector(
        *_closed_form_raw(mu_t, sig_t * sig_t, mu_c, sig_c * sig_c, theta.tau)
    )


def _closed_form_raw(mu_t, var_t, mu_c, var_c, tau):
    """Hot-path version on raw floats; returns a plain 5-tuple."""
    rho = math.sin(0.5 * math.pi * tau)
    st = math.sqrt(var_t)
    sc = math.sqrt(var_c)
    s = math.sqrt(max(var_t + var_c - 2.0 * rho * st * sc, 1e-300))
    kappa = (mu_c - mu_t) / s
    p = 0.5 * math.erfc(-kappa / _SQRT2)
    # Inverse Mills ratios phi(k)/Phi(k) and phi(k)/Phi(-k) via the scaled
    # complementary error function, stable in both tails.
    zeta1 = _SQRT_2_OVER_PI / erfcx(-kappa / _SQRT2)
    zeta2 = _SQRT_2_OVER_PI / erfcx(kappa / _SQRT2)
    a_t = st * (st - rho * sc) / s
    a_c = sc * (sc - rho * st) / s
    mu1 = mu_t - a_t * zeta1
    mu2 = mu_c - a_c * zeta2
    var1 = max(var_t - a_t * a_t * (kappa * zeta1 + zeta1 * zeta1), 0.0)
    var2 = max(var_c - a_c * a_c * (zeta2 * zeta2 - kappa * zeta2), 0.0)
    return p, mu1, mu2, var1, var2


# ----------------------------------------------------------------------
# Monte-Carlo engine with common random numbers
# ----------------------------------------------------------------------

# Cached uniform draws keyed by (crn_seed, m_draws); derived transforms are
# attached lazily.  Tiny capacity: estimation touches at most a couple of
# (seed, size) combinations at a time.
_CRN_CACHE: dict[tuple, dict] = {}
_CRN_CACHE_MAX = 4


def _crn_slot(crn_seed: int, m_draws: int) -> dict:
    key = (int(crn_seed), int(m_draws))
    slot = _CRN_CACHE.get(key)
    if slot is None:
        rng = np.random.default_rng(np.random.SeedSequence([int(crn_seed), _CRN_STREAM]))
        draws = np.clip(rng.random((m_draws, 2)), CLAMP_EPS, 1.0 - CLAMP_EPS)
        slot = {"u": np.ascontiguousarray(draws[:, 0]), "w": np.ascontiguousarray(draws[:, 1])}
        if len(_CRN_CACHE) >= _CRN_CACHE_MAX:
            _CRN_CACHE.pop(next(iter(_CRN_CACHE)))
        _CRN_CACHE[key] = slot
    return slot


def _cached(slot: dict, name: str):
    arr = slot.get(name)
    if arr is None:
        if name == "zu":
            arr = ndtri(slot["u"])
        elif name == "zw":
            arr = ndtri(slot["w"])
        elif name == "lnlu":
            arr = np.log(-np.log(slot["u"]))
        elif name == "q1mu":
            arr = ndtri(1.0 - slot["u"])
        else:  # pragma: no cover
            raise KeyError(name)
        slot[name] = arr
    return arr


class McMomentEngine:
    """Common-random-numbers simulator of the five theoretical moments.

    One fixed block of uniforms (keyed by ``crn_seed`` and ``m_draws``) is
    pushed through the copula and marginal transforms at each parameter
    value, which makes the moment map continuous in theta.  Negative tau is
    realized for the Archimedean families by the decreasing transform
    ``v -> 1 - v`` of the censoring-side latent uniform; the Normal family
    takes a negative correlation directly.
    """

    def __init__(self, copula_family, family_t, family_c, m_draws=100_000, crn_seed=0):
        self.copula_family = CopulaFamily(copula_family)
        self.family_t = MarginalFamily(family_t)
        self.family_c = MarginalFamily(family_c)
        if m_draws < MIN_MC_DRAWS:
            raise DomainError(f"m_draws must be at least {MIN_MC_DRAWS}")
        self.m_draws = int(m_draws)
        self.crn_seed = int(crn_seed)

    def __reduce__(self):
        return (
            McMomentEngine,
            (self.copula_family, self.family_t, self.family_c, self.m_draws, self.crn_seed),
        )

    # -- log-time transforms ------------------------------------------

    def _log_t(self, slot, params):
        fam = self.family_t
        if fam is MarginalFamily.EXPONENTIAL:
            return _cached(slot, "lnlu") - math.log(params[0])
        if fam is MarginalFamily.WEIBULL:
            a, lam = params
            return (_cached(slot, "lnlu") - math.log(lam)) / a
        mu, sig = params
        return mu + sig * _cached(slot, "q1mu")

    def _log_c_from_y(self, y, params):
        # Normal-copula shortcut: the censoring-side latent is v = Phi(y),
        # so Phi^{-1}(1 - v) = -y and log(-log v) = log(-log_ndtr(y)).
        fam = self.family_c
        if fam is MarginalFamily.LOGNORMAL:
            mu, sig = params
            return mu - sig * y
        nlv = -log_ndtr(y)
        if fam is MarginalFamily.EXPONENTIAL:
            return np.log(nlv) - math.log(params[0])
        a, lam = params
        return (np.log(nlv) - math.log(lam)) / a

    def _log_c_from_v(self, v, params):
        fam = self.family_c
        if fam is MarginalFamily.LOGNORMAL:
            mu, sig = params
            return mu + sig * ndtri(1.0 - v)
        nlv = -np.log(v)
        if fam is MarginalFamily.EXPONENTIAL:
            return np.log(nlv) - math.log(params[0])
        a, lam = params
        return (np.log(nlv) - math.log(lam)) / a

    # -------------------------------------------------------------------

    def moments_from_params(self, params_t, params_c, tau):
        """Raw 5-tuple of moments; params are natural marginal tuples."""
        slot = _crn_slot(self.crn_seed, self.m_draws)
        log_t = self._log_t(slot, params_t)
        if self.copula_family is CopulaFamily.NORMAL:
            rho = math.sin(0.5 * math.pi * tau)
            y = rho * _cached(slot, "zu") + math.sqrt(1.0 - rho * rho) * _cached(slot, "zw")
            log_c = self._log_c_from_y(y, params_c)
        else:
            if tau == 0.0 or self.copula_family is CopulaFamily.INDEPENDENCE:
                if abs(tau) > 1e-12:
                    raise DomainError("independence copula only matches tau = 0")
                v = slot["w"]
            else:
                cop = param_from_tau(self.copula_family, abs(tau))
                v = cop.conditional_inverse(slot["u"], slot["w"])
                if tau < 0.0:
                    v = 1.0 - v
            log_c = self._log_c_from_v(np.clip(v, CLAMP_EPS, 1.0 - CLAMP_EPS), params_c)
        events = log_t <= log_c
        n1 = int(np.count_nonzero(events))
        if n1 < 2 or self.m_draws - n1 < 2:
            raise MomentError("simulated moments degenerate: one censoring group is empty")
        log_x = np.minimum(log_t, log_c)
        g1 = log_x[events]
        g0 = log_x[~events]
        return (
            n1 / self.m_draws,
            float(g1.mean()),
            float(g0.mean()),
            float(g1.var()),
            float(g0.var()),
        )

    def __call__(self, theta: ThetaVector) -> MomentVector:
        return MomentVector(
            *self.moments_from_params(
                theta.marginal_t.params, theta.marginal_c.params, theta.tau
            )
        )


def theoretical_moments_mc(
    theta: ThetaVector,
    copula_family,
    m_draws: int = 100_000,
    crn_seed: int = 0,
) -> MomentVector:
    """Monte-Carlo theoretical moments under any supported family pair.

    Deterministic for fixed ``(theta, copula_family, m_draws, crn_seed)``;
    reusing the seed across calls yields common random numbers.
    """
    engine = McMomentEngine(
        copula_family,
        theta.marginal_t.family,
        theta.marginal_c.family,
        m_draws=m_draws,
        crn_seed=crn_seed,
    )
    return engine(theta)


# ----------------------------------------------------------------------
# GMM objective
# ----------------------------------------------------------------------


def objective(theta: ThetaVector, data: SurvivalData, weights: WeightMatrix, moment_engine) -> float:
    """Weighted quadratic distance between model and sample moments.

    ``moment_engine`` is a callable mapping a ``ThetaVector`` to a
    ``MomentVector`` (either ``closed_form_moments`` or an
    ``McMomentEngine``/``theoretical_moments_mc`` wrapper).
    """
    sample = sample_moments(data).as_array()
    return objective_from_sample(theta, sample, weights, moment_engine)


def objective_from_sample(theta: ThetaVector, sample_arr, weights: WeightMatrix, moment_engine) -> float:
    resid = moment_engine(theta).as_array() - sample_arr
    return float(np.dot(weights.diag, resid * resid))
