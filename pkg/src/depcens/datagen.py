"""Simulation of singly-observed survival data with dependent censoring.

Latent event and censoring times are generated with the conditional-CDF
method: u ~ U(0,1) drives the event margin, a second uniform w is pushed
through the copula's conditional inverse to give v, and the two uniforms are
mapped through the inverse survival functions.  Each subject consumes a
fixed block of draws from a seeded generator, so enlarging n extends a
sample without perturbing earlier subjects.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .copulas import CLAMP_EPS, CopulaSpec
from .errors import ConfigError, DomainError
from .marginals import MarginalFamily, MarginalSpec

# Sub-stream labels hung off the user seed.  The treatment stream is kept
# separate so that a null treatment effect reproduces the plain sample.
_STREAM_PAIRS = 0
_STREAM_TRT = 1


@dataclasses.dataclass(frozen=True)
class SurvivalRecord:
    """One observed subject: follow-up time and event indicator."""

    x: float
    delta: int

    def __post_init__(self):
        if not self.x > 0.0 or not np.isfinite(self.x):
            raise DomainError("follow-up time must be positive and finite")
        if self.delta not in (0, 1):
            raise DomainError("delta must be 0 or 1")


@dataclasses.dataclass(frozen=True)
class RctRecord(SurvivalRecord):
    """Observed subject in a two-arm trial."""

    trt: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.trt not in (0, 1):
            raise DomainError("trt must be 0 or 1")


class SurvivalData:
    """Column-oriented container for observed records.

    Wraps contiguous arrays so that bootstrap resampling and moment
    computations stay cheap; iteration yields ``SurvivalRecord`` (or
    ``RctRecord`` when a treatment column is present).
    """

    __slots__ = ("x", "delta", "trt")

    def __init__(self, x, delta, trt=None):
        x = np.ascontiguousarray(x, dtype=float)
        delta = np.ascontiguousarray(delta, dtype=np.int8)
        if x.ndim != 1 or x.shape != delta.shape:
            raise DomainError("x and delta must be 1-d arrays of equal length")
        if len(x) == 0:
            raise DomainError("dataset is empty")
        if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
            raise DomainError("follow-up times must be positive and finite")
        if not np.isin(delta, (0, 1)).all():
            raise DomainError("delta entries must be 0 or 1")
        if trt is not None:
            trt = np.ascontiguousarray(trt, dtype=np.int8)
            if trt.shape != x.shape:
                raise DomainError("trt must match x in length")
            if not np.isin(trt, (0, 1)).all():
                raise DomainError("trt entries must be 0 or 1")
        self.x = x
        self.delta = delta
        self.trt = trt

    @classmethod
    def from_records(cls, records) -> "SurvivalData":
        records = list(records)
        if records and isinstance(records[0], RctRecord):
            return cls(
                [r.x for r in records],
                [r.delta for r in records],
                [r.trt for r in records],
            )
        return cls([r.x for r in records], [r.delta for r in records])

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self):
        if self.trt is None:
            return (SurvivalRecord(float(x), int(d)) for x, d in zip(self.x, self.delta))
        return (
            RctRecord(float(x), int(d), int(t))
            for x, d, t in zip(self.x, self.delta, self.trt)
        )

    @property
    def n_events(self) -> int:
        return int(self.delta.sum())

    def sorted(self) -> "SurvivalData":
        """Canonical row order: ascending x, censored before events at ties."""
        order = np.lexsort((self.delta, self.x))
        trt = None if self.trt is None else self.trt[order]
        return SurvivalData(self.x[order], self.delta[order], trt)

    def take(self, indices) -> "SurvivalData":
        trt = None if self.trt is None else self.trt[indices]
        return SurvivalData(self.x[indices], self.delta[indices], trt)

    def resample(self, rng: np.random.Generator) -> "SurvivalData":
        return self.take(rng.integers(0, len(self), size=len(self)))


@dataclasses.dataclass(frozen=True)
class RctEffects:
    """Multiplicative treatment effects on the event/censoring hazards."""

    beta_t: float
    beta_c: float
    trt_prob: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.trt_prob < 1.0:
            raise ConfigError("treatment probability must lie in (0, 1)")
        if not (np.isfinite(self.beta_t) and np.isfinite(self.beta_c)):
            raise ConfigError("treatment effects must be finite")


@dataclasses.dataclass(frozen=True)
class GenConfig:
    """Everything needed to simulate one dataset."""

    copula: CopulaSpec
    marginal_t: MarginalSpec
    marginal_c: MarginalSpec
    n: int
    seed: int
    rct: RctEffects | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be at least 1")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


def _latent_uniforms(config: GenConfig):
    draws = _rng(config.seed, _STREAM_PAIRS).random((config.n, 2))
    # Clamp away from {0, 1}: inverse survival at 0 would be infinite.
    draws = np.clip(draws, CLAMP_EPS, 1.0 - CLAMP_EPS)
    return draws[:, 0], config.copula.conditional_inverse(draws[:, 0], draws[:, 1])


def sample_pairs(config: GenConfig):
    """Draw the latent (t, c) pairs before censoring.

    Returns
    -------
    (ndarray, ndarray)
        Event times and censoring times of length ``config.n``, coupled
        through ``config.copula``.
    """
    if config.rct is not None:
        raise ConfigError("config carries treatment effects; use sample_rct")
    u, v = _latent_uniforms(config)
    return config.marginal_t.inverse_survival(u), config.marginal_c.inverse_survival(v)


def sample_rct(config: GenConfig):
    """Draw latent times in a two-arm trial with hazard-multiplier effects.

    The treatment arm multiplies each margin's scale parameter by
    ``exp(beta)``, which is a proportional-hazards shift; this requires
    exponential or Weibull margins.  Treatment labels come from a separate
    sub-stream, so zero effects reproduce ``sample_pairs`` draws exactly.

    Returns
    -------
    (ndarray, ndarray, ndarray)
        Event times, censoring times and 0/1 treatment labels.
    """
    if config.rct is None:
        raise ConfigError("config.rct must be set for sample_rct")
    for spec in (config.marginal_t, config.marginal_c):
        if spec.family is MarginalFamily.LOGNORMAL:
            raise ConfigError("hazard-multiplier effects need exponential or Weibull margins")
    u, v = _latent_uniforms(config)
    trt = (_rng(config.seed, _STREAM_TRT).random(config.n) < config.rct.trt_prob).astype(np.int8)
    t = _scaled_inverse_survival(config.marginal_t, u, config.rct.beta_t, trt)
    c = _scaled_inverse_survival(config.marginal_c, v, config.rct.beta_c, trt)
    return t, c, trt


def _scaled_inverse_survival(spec: MarginalSpec, u, beta: float, trt):
    mult = np.exp(beta * trt)
    if spec.family is MarginalFamily.EXPONENTIAL:
        return -np.log(u) / (spec.params[0] * mult)
    a, lam = spec.params
    return np.power(-np.log(u) / (lam * mult), 1.0 / a)


def censor(t, c, trt=None) -> SurvivalData:
    """Collapse latent pairs into observed records; ties count as events."""
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    return SurvivalData(np.minimum(t, c), (t <= c).astype(np.int8), trt)


def sample_survival_data(config: GenConfig) -> SurvivalData:
    """Convenience wrapper: latent draw followed by censoring."""
    if config.rct is not None:
        return censor(*sample_rct(config))
    return censor(*sample_pairs(config))
