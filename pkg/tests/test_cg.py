"""Copula-graphic survival estimation and the search-region construction."""

import numpy as np
import pytest

from depcens import (
    CopulaSpec,
    DegenerateCurveError,
    DomainError,
    FeasibleRegion,
    GenConfig,
    MarginalSpec,
    SurvivalData,
    UnsupportedFamilyError,
    cg_survival,
    feasible_region,
    param_from_tau,
    sample_survival_data,
)

from conftest import km_reference, random_censored_dataset


class TestWorkedExample:
    """Five subjects, events at 1/3/5, censorings at 2/4."""

    def test_clayton_half_dependence_values(self, toy_data):
        curve = cg_survival(toy_data, param_from_tau("clayton", 0.5))
        assert np.array_equal(curve.times, [1.0, 3.0, 5.0])
        expect = [0.8, 0.44566881162492455, 0.0]
        assert np.allclose(curve.survival, expect, atol=1e-12)

    def test_independence_equals_product_limit(self, toy_data):
        curve = cg_survival(toy_data, CopulaSpec("independence"))
        assert np.allclose(curve.survival, [0.8, 8.0 / 15.0, 0.0], atol=1e-14)

    def test_stronger_dependence_lowers_the_curve(self, toy_data):
        # For positive dependence the independence assumption over-estimates
        # survival, so the adjusted curve must sit at or below it.
        km = cg_survival(toy_data, CopulaSpec("independence"))
        prev = km.survival
        for tau in (0.3, 0.5, 0.8):
            cur = cg_survival(toy_data, param_from_tau("clayton", tau)).survival
            assert np.all(cur <= prev + 1e-12)
            prev = cur


class TestProductLimitIdentity:
    def test_fifty_random_datasets(self, rng):
        for _ in range(50):
            n = int(rng.integers(4, 31))
            data = random_censored_dataset(rng, n)
            times, surv = km_reference(data.x, data.delta)
            curve = cg_survival(data, CopulaSpec("independence"))
            assert np.array_equal(curve.times, times)
            assert np.allclose(curve.survival, surv, atol=1e-12)

    def test_censoring_target_swaps_roles(self, rng):
        data = random_censored_dataset(rng, 25)
        times, surv = km_reference(data.x, 1 - data.delta)
        curve = cg_survival(data, CopulaSpec("independence"), target="c")
        assert np.array_equal(curve.times, times)
        assert np.allclose(curve.survival, surv, atol=1e-12)

    def test_tied_event_and_censoring_time(self):
        # A censored row tied with an event must still be at risk for it.
        data = SurvivalData(np.array([2.0, 2.0, 3.0]), np.array([1, 0, 1]))
        times, surv = km_reference(data.x, data.delta)
        curve = cg_survival(data, CopulaSpec("independence"))
        assert np.allclose(curve.survival, surv, atol=1e-14)
        assert np.allclose(curve.survival, [2.0 / 3.0, 0.0], atol=1e-14)


class TestCurveShape:
    @pytest.mark.parametrize("family,tau", [("clayton", 0.3), ("gumbel", 0.6), ("frank", 0.8)])
    def test_monotone_unit_range(self, rng, family, tau):
        data = random_censored_dataset(rng, 40)
        curve = cg_survival(data, param_from_tau(family, tau))
        assert np.all(np.diff(curve.times) > 0)
        assert np.all(np.diff(curve.survival) <= 1e-12)
        assert np.all((curve.survival >= 0.0) & (curve.survival <= 1.0))

    def test_row_order_invariance(self, rng):
        data = random_censored_dataset(rng, 30)
        perm = rng.permutation(len(data))
        shuffled = data.take(perm)
        spec = param_from_tau("clayton", 0.5)
        a = cg_survival(data, spec)
        b = cg_survival(shuffled, spec)
        assert np.array_equal(a.times, b.times)
        assert np.allclose(a.survival, b.survival, atol=0.0)

    def test_duplicate_event_times_collapse(self):
        data = SurvivalData(
            np.array([1.0, 1.0, 2.0, 3.0]), np.array([1, 1, 0, 1])
        )
        curve = cg_survival(data, param_from_tau("clayton", 0.4))
        assert np.array_equal(curve.times, [1.0, 3.0])

    def test_all_censored_degenerate(self):
        data = SurvivalData(np.array([1.0, 2.0, 3.0]), np.array([0, 0, 0]))
        with pytest.raises(DegenerateCurveError):
            cg_survival(data, CopulaSpec("independence"))

    def test_normal_copula_unsupported(self, toy_data):
        with pytest.raises(UnsupportedFamilyError):
            cg_survival(toy_data, CopulaSpec("normal", 0.5))


def test_dependence_ordering_on_simulated_data():
    # Data generated under strong positive dependence: the curve computed
    # under an independence working assumption must lie pointwise above
    # the curve computed under the generating dependence level.
    cfg = GenConfig(
        copula=param_from_tau("clayton", 0.8),
        marginal_t=MarginalSpec("weibull", (2.0, 0.25)),
        marginal_c=MarginalSpec("exponential", (0.2,)),
        n=400,
        seed=2,
    )
    data = sample_survival_data(cfg)
    indep = cg_survival(data, CopulaSpec("independence"))
    strong = cg_survival(data, param_from_tau("clayton", 0.8))
    assert np.all(indep.survival >= strong.survival - 1e-12)
    interior = indep.survival > 1e-9
    assert np.any(indep.survival[interior] > strong.survival[interior] + 1e-4)


class TestFeasibleRegion:
    def test_contains_generating_parameters(self):
        cfg = GenConfig(
            copula=param_from_tau("clayton", 0.5),
            marginal_t=MarginalSpec("exponential", (0.025,)),
            marginal_c=MarginalSpec("exponential", (0.039,)),
            n=500,
            seed=17,
        )
        data = sample_survival_data(cfg)
        region = feasible_region(
            data, "exponential", "exponential", fits_per_tau=25, seed=1
        )
        truth = np.array([0.025, 0.039])
        assert region.contains(truth)
        assert np.all(region.lower > 0.0)
        assert np.all(region.lower < region.upper)

    def test_deterministic_under_seed(self, rng):
        data = random_censored_dataset(rng, 120)
        a = feasible_region(data, "weibull", "exponential", fits_per_tau=10, seed=3)
        b = feasible_region(data, "weibull", "exponential", fits_per_tau=10, seed=3)
        assert np.array_equal(a.lower, b.lower)
        assert np.array_equal(a.upper, b.upper)

    def test_names_and_bounds_layout(self, rng):
        data = random_censored_dataset(rng, 80)
        region = feasible_region(data, "weibull", "lognormal", fits_per_tau=10, seed=0)
        assert region.names == ("t_shape", "t_scale", "c_mu", "c_sigma_sq")
        assert len(region.bounds_list()) == 4

    def test_clip_projects_into_box(self):
        region = FeasibleRegion(
            "exponential", "exponential", np.array([0.1, 0.2]), np.array([1.0, 2.0])
        )
        assert np.allclose(region.clip([0.0, 5.0]), [0.1, 2.0])
        assert not region.contains([0.0, 5.0])
        assert region.contains([0.5, 1.0])

    def test_validation(self):
        with pytest.raises(DomainError):
            FeasibleRegion("exponential", "exponential", np.array([1.0, 1.0]), np.array([2.0]))
        with pytest.raises(DomainError):
            FeasibleRegion("exponential", "exponential", np.array([1.0, 3.0]), np.array([2.0, 2.0]))
        with pytest.raises(DomainError):
            FeasibleRegion(
                "exponential", "exponential", np.array([1.0, np.inf]), np.array([2.0, 3.0])
            )
