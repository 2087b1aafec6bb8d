"""Shared fixtures and reference implementations.

The reference estimators here are deliberately written in the most naive
style possible (explicit loops, no shared code with the package) so that
agreement is meaningful.
"""

import numpy as np
import pytest

from depcens import EstimateOptions, SurvivalData


def km_reference(x, delta):
    """Product-limit survival at each distinct event time, naive loops."""
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=int)
    times = sorted(set(x[delta == 1]))
    surv = []
    s = 1.0
    for t in times:
        at_risk = int(np.sum(x >= t))
        deaths = int(np.sum((x == t) & (delta == 1)))
        s *= 1.0 - deaths / at_risk
        surv.append(s)
    return np.array(times), np.array(surv)


def random_censored_dataset(rng, n, tie_prob=0.3):
    """Small dataset with deliberate ties and both outcome kinds."""
    x = rng.exponential(scale=5.0, size=n)
    if tie_prob > 0.0:
        # Round a share of times onto a coarse grid to force ties.
        coarse = rng.random(n) < tie_prob
        x[coarse] = np.ceil(x[coarse])
    x = np.maximum(x, 0.25)
    delta = (rng.random(n) < 0.6).astype(int)
    # Guarantee at least one of each so every estimator is exercised.
    delta[0] = 1
    delta[-1] = 0
    return SurvivalData(x, delta)


def desk_options(**overrides):
    """Estimator knobs small enough for unit tests on one core."""
    base = dict(
        bag_replicates=3,
        anneal_budget=500,
        search_draws=10_000,
        refine_draws=30_000,
        weight_bootstrap=40,
        replicate_weight_bootstrap=15,
        fits_per_tau=12,
        seed=0,
    )
    base.update(overrides)
    return EstimateOptions(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


@pytest.fixture
def toy_data():
    """The five-subject worked example used across the suite."""
    return SurvivalData(
        np.array([1.0, 2.0, 3.0, 4.0, 5.0]),
        np.array([1, 0, 1, 0, 1]),
    )
