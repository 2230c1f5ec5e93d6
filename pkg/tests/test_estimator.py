"""Conditional CDF and quantile estimator against independent re-summation."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truncq.errors import NoLocalDataError, QuantileNotBracketedError
from truncq.estimator import QuantileQuery, estimator_from_dict, fit
from truncq.kernels import KernelSpec, SmootherSpec, smoother_eval
from truncq.lynden_bell import ObservedSample, lynden_bell_g

from .conftest import make_random_sample
from .oracles import (
    nw_smoothed_cdf,
    scalar_quantile_bisect,
    weighted_cdf_enum,
)

HAND = ObservedSample(x=np.array([0.0, 0.5, 1.0]),
                      y=np.array([0.5, 0.25, 0.4]),
                      t=np.array([0.1, 0.2, 0.3]))


def one_record(x=0.3, y=2.0, t=0.5):
    return ObservedSample(x=np.array([x]), y=np.array([y]), t=np.array([t]))


class TestFit:
    def test_hand_weights(self):
        est = fit(HAND, h=0.5)
        g = lynden_bell_g(HAND)
        expected = 1.0 / g.evaluate(HAND.y)
        np.testing.assert_allclose(est.weights, expected, rtol=0, atol=1e-15)
        np.testing.assert_allclose(est.weights, [1.0, 2.0, 1.0], atol=1e-15)
        assert est.mu_hat == pytest.approx(0.75, abs=1e-15)
        assert est.n_active == 3

    def test_no_truncation_weights_are_one(self, rng):
        sample = make_random_sample(rng, truncated=False)
        est = fit(sample, h=0.4)
        assert np.all(est.weights == 1.0)
        assert est.mu_hat == pytest.approx(1.0, abs=1e-12)

    def test_single_record_weight(self):
        est = fit(one_record(), h=0.5)
        assert est.weights[0] == 1.0
        assert est.mu_hat == 1.0

    def test_at_least_one_record_always_active(self, rng):
        # t_i <= y_i <= max y, so G_n(max y) is an empty product: never zero
        for _ in range(50):
            sample = make_random_sample(rng)
            est = fit(sample, h=0.3)
            assert est.active.any()
            assert est.active[np.argmax(sample.y)]

    def test_rejects_bad_bandwidth(self):
        with pytest.raises(ValueError):
            fit(HAND, h=0.0)

    def test_deterministic(self, rng):
        sample = make_random_sample(rng)
        a = fit(sample, h=0.3)
        b = fit(sample, h=0.3)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.mu_hat == b.mu_hat


class TestDensities:
    def test_observed_single_record(self):
        est = fit(one_record(x=0.3), h=0.25)
        assert est.density_observed(0.3) == pytest.approx(0.75 / 0.25, abs=1e-12)

    def test_observed_outside_support(self):
        est = fit(HAND, h=0.1)
        assert est.density_observed(5.0) == 0.0
        assert est.density_marginal(5.0) == 0.0
        assert est.joint_part(5.0, 0.4) == 0.0

    def test_observed_matches_direct_sum(self, rng):
        sample = make_random_sample(rng, n=3)
        est = fit(sample, h=0.7)
        xq = float(rng.normal())
        direct = sum(0.75 * max(0.0, 1.0 - ((xq - xi) / 0.7) ** 2) * (abs(xq - xi) <= 0.7)
                     for xi in sample.x) / (3 * 0.7)
        assert est.density_observed(xq) == pytest.approx(direct, abs=1e-12)

    def test_marginal_reduces_to_observed_without_truncation(self, rng):
        sample = make_random_sample(rng, truncated=False)
        est = fit(sample, h=0.5)
        for xq in rng.normal(size=5):
            assert est.density_marginal(xq) == pytest.approx(est.density_observed(xq), abs=1e-14)

    def test_marginal_hand_sum(self):
        est = fit(HAND, h=1.0)
        xq = 0.0
        # weights (1, 2, 1), mu 3/4, epanechnikov at (0, -0.5, -1)
        expected = 0.75 / 3.0 * (1 * 0.75 + 2 * 0.75 * (1 - 0.25) + 1 * 0.0)
        assert est.density_marginal(xq) == pytest.approx(expected, abs=1e-12)

    def test_joint_part_saturation(self):
        est = fit(HAND, h=0.5)
        assert est.joint_part(0.5, 10.0) == pytest.approx(est.density_marginal(0.5), abs=1e-14)
        assert est.joint_part(0.5, -10.0) == 0.0

    def test_joint_part_hand_sum(self, rng):
        sample = make_random_sample(rng, n=3)
        est = fit(sample, h=0.8)
        xq, yq = 0.2, 3.0
        num = 0.0
        for xi, yi, wi in zip(sample.x, sample.y, est.weights):
            u = (xq - xi) / 0.8
            k = 0.75 * (1 - u * u) if abs(u) <= 1 else 0.0
            num += wi * k * smoother_eval(SmootherSpec(), (yq - yi) / 0.8)
        assert est.joint_part(xq, yq) == pytest.approx(est.mu_hat * num / (3 * 0.8), abs=1e-12)


class TestConditionalCdf:
    def test_single_record_is_smoother(self):
        est = fit(one_record(x=0.0, y=2.0), h=0.5)
        for yq in (1.4, 1.8, 2.0, 2.3, 2.6):
            expected = smoother_eval(SmootherSpec(), (yq - 2.0) / 0.5)
            assert est.conditional_cdf(0.2, yq) == pytest.approx(expected, abs=1e-15)

    def test_no_data_convention(self):
        est = fit(HAND, h=0.1)
        assert est.conditional_cdf(9.0, 0.4) == 0.0
        assert not est.has_local_data(9.0)
        assert est.has_local_data(0.5)

    def test_matches_unweighted_oracle_without_truncation(self, rng):
        for _ in range(25):
            sample = make_random_sample(rng, truncated=False)
            est = fit(sample, h=0.6)
            for _ in range(8):
                xq = float(rng.uniform(-2, 2))
                yq = float(rng.uniform(0, 6))
                expected = nw_smoothed_cdf(sample.x, sample.y, 0.6, xq, yq)
                assert est.conditional_cdf(xq, yq) == pytest.approx(expected, abs=1e-12)

    def test_matches_weighted_enumeration_with_truncation(self, rng):
        for _ in range(15):
            sample = make_random_sample(rng)
            est = fit(sample, h=0.7)
            for _ in range(5):
                xq = float(rng.uniform(-2, 2))
                yq = float(rng.uniform(0, 6))
                expected = weighted_cdf_enum(sample.x, sample.y, sample.t, 0.7, xq, yq)
                assert est.conditional_cdf(xq, yq) == pytest.approx(expected, abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000),
           st.floats(min_value=-2, max_value=2, allow_nan=False))
    def test_monotone_in_y_and_in_range(self, seed, xq):
        rng = np.random.default_rng(seed)
        sample = make_random_sample(rng)
        est = fit(sample, h=float(rng.uniform(0.2, 1.5)))
        ys = np.sort(rng.uniform(-1, 7, size=12))
        vals = [est.conditional_cdf(xq, yv) for yv in ys]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_mu_cancellation(self, rng):
        sample = make_random_sample(rng)
        est = fit(sample, h=0.5)
        perturbed = dataclasses.replace(est, mu_hat=17.3)
        for _ in range(10):
            xq, yq = float(rng.uniform(-2, 2)), float(rng.uniform(0, 6))
            assert est.conditional_cdf(xq, yq) == perturbed.conditional_cdf(xq, yq)

    def test_grid_agrees_with_scalar(self, rng):
        sample = make_random_sample(rng)
        est = fit(sample, h=0.5)
        xs = rng.uniform(-2, 2, 6)
        ys = rng.uniform(0, 6, 7)
        grid = est.cdf_grid(xs, ys)
        for i, xq in enumerate(xs):
            for j, yq in enumerate(ys):
                assert grid[i, j] == pytest.approx(est.conditional_cdf(xq, yq), abs=1e-12)


class TestQuantile:
    def test_single_record_median(self):
        est = fit(one_record(x=0.0, y=2.0), h=0.5)
        q = est.conditional_quantile(QuantileQuery(x=0.1, p=0.5, search_interval=(0.0, 4.0),
                                                   tolerance=1e-10))
        assert q == pytest.approx(2.0, abs=1e-8)

    def test_saturation_near_attained_maximum(self, rng):
        sample = make_random_sample(rng, n=30, truncated=False)
        h = 0.5
        est = fit(sample, h=h)
        xq = float(np.median(sample.x))
        b = sample.y.max() + h + 1.0
        top = est.conditional_cdf(xq, b)
        q = est.conditional_quantile(QuantileQuery(x=xq, p=top - 1e-9, search_interval=(0.0, b)))
        assert q <= sample.y.max() + h
        assert q >= np.percentile(sample.y, 50)

    def test_bracket_failure_carries_attained_range(self):
        est = fit(HAND, h=0.5)
        with pytest.raises(QuantileNotBracketedError) as err:
            est.conditional_quantile(QuantileQuery(x=0.5, p=0.99, search_interval=(0.2, 0.3)))
        assert 0.0 <= err.value.attained_low <= err.value.attained_high <= 1.0
        assert err.value.p == 0.99

    def test_no_local_data_error(self):
        est = fit(HAND, h=0.1)
        with pytest.raises(NoLocalDataError):
            est.conditional_quantile(QuantileQuery(x=9.0, p=0.5, search_interval=(0.0, 1.0)))

    def test_matches_reference_bisection(self, rng):
        sample = make_random_sample(rng, n=35)
        est = fit(sample, h=0.6)
        xq = float(np.median(sample.x))
        a, b = 0.0, 8.0
        tol = 1e-8 * (b - a)
        for p in (0.3, 0.5, 0.7):
            got = est.conditional_quantile(QuantileQuery(x=xq, p=p, search_interval=(a, b)))
            ref = scalar_quantile_bisect(lambda yv: est.conditional_cdf(xq, yv), p, a, b, tol)
            assert got == pytest.approx(ref, abs=2 * tol)

    def test_inversion_contract(self, rng):
        for _ in range(40):
            sample = make_random_sample(rng, n=25)
            est = fit(sample, h=0.7)
            xq = float(rng.choice(sample.x))
            a, b = -1.0, 8.0
            lo, hi = est.conditional_cdf(xq, a), est.conditional_cdf(xq, b)
            if not lo < 0.2 < hi:
                continue
            query = QuantileQuery(x=xq, p=0.2, search_interval=(a, b))
            q = est.conditional_quantile(query)
            tol = query.resolved_tolerance
            modulus = est.conditional_cdf(xq, q + tol) - est.conditional_cdf(xq, q - tol)
            assert abs(est.conditional_cdf(xq, q) - 0.2) <= modulus + 1e-12

    def test_monotone_in_p(self, rng):
        sample = make_random_sample(rng, n=30)
        est = fit(sample, h=0.8)
        xq = float(np.median(sample.x))
        tol = 1e-8 * 9.0
        qs = []
        for p in (0.2, 0.4, 0.6, 0.8):
            try:
                qs.append(est.conditional_quantile(
                    QuantileQuery(x=xq, p=p, search_interval=(-1.0, 8.0))))
            except QuantileNotBracketedError:
                break
        assert all(b >= a - tol for a, b in zip(qs, qs[1:]))

    def test_weight_scaling_invariance(self, rng):
        sample = make_random_sample(rng, n=25)
        est = fit(sample, h=0.6)
        scale = 7.3
        scaled = dataclasses.replace(
            est, weights=est.weights * scale, _w_active=est.weights[est.active] * scale)
        xq = float(np.median(sample.x))
        query = QuantileQuery(x=xq, p=0.5, search_interval=(-1.0, 8.0))
        assert est.conditional_quantile(query) == pytest.approx(
            scaled.conditional_quantile(query), abs=1e-9)

    def test_query_validation(self):
        with pytest.raises(ValueError):
            QuantileQuery(x=0.0, p=0.0, search_interval=(0, 1))
        with pytest.raises(ValueError):
            QuantileQuery(x=0.0, p=0.5, search_interval=(1, 1))
        with pytest.raises(ValueError):
            QuantileQuery(x=0.0, p=0.5, search_interval=(0, 1), tolerance=0.0)


class TestPredictMedian:
    def test_single_record(self):
        est = fit(one_record(x=0.0, y=2.0), h=0.5)
        assert est.predict_median(0.0, (0.0, 4.0), tol=1e-9) == pytest.approx(2.0, abs=1e-7)

    def test_close_to_regression_for_large_sample(self):
        from truncq.datagen import TruncatedDataModel, generate

        model = TruncatedDataModel(seed=9, truncation="none")
        ds = generate(model, 4000)
        est = fit(ds.observed, h=0.25)
        for xq in (-0.5, 0.0, 0.5):
            want = 3.0 + math.sin(xq)
            assert abs(est.predict_median(xq, (1.0, 5.0)) - want) < 0.15

    def test_no_data_error(self):
        est = fit(HAND, h=0.1)
        with pytest.raises(NoLocalDataError):
            est.predict_median(25.0, (0.0, 1.0))


class TestSupErrorCdf:
    def test_self_comparison_is_zero(self, rng):
        sample = make_random_sample(rng)
        est = fit(sample, h=0.5)
        xs = np.linspace(-1, 1, 5)
        ys = np.linspace(1, 5, 7)
        assert est.sup_error_cdf(lambda x, y: est.conditional_cdf(x, y), xs, ys) == 0.0

    def test_single_point_grid(self, rng):
        sample = make_random_sample(rng)
        est = fit(sample, h=0.5)
        diff = est.sup_error_cdf(lambda x, y: 0.25, [0.1], [3.0])
        assert diff == pytest.approx(abs(est.conditional_cdf(0.1, 3.0) - 0.25), abs=1e-15)

    def test_rejects_empty_grid(self, rng):
        est = fit(make_random_sample(rng), h=0.5)
        with pytest.raises(ValueError):
            est.sup_error_cdf(lambda x, y: 0.0, [], [1.0])


class TestSerialization:
    def test_roundtrip_preserves_queries(self, rng):
        sample = make_random_sample(rng, n=20)
        est = fit(sample, kernel=KernelSpec("biweight"),
                  smoother=SmootherSpec("integrated_triweight"), h=0.45)
        rebuilt = estimator_from_dict(est.to_dict())
        assert rebuilt.h == est.h
        assert rebuilt.mu_hat == est.mu_hat
        for _ in range(10):
            xq, yq = float(rng.uniform(-2, 2)), float(rng.uniform(0, 6))
            assert rebuilt.conditional_cdf(xq, yq) == est.conditional_cdf(xq, yq)

    def test_rejects_foreign_documents(self):
        with pytest.raises(ValueError):
            estimator_from_dict({"format": "something-else"})
        est = fit(HAND, h=0.5)
        state = est.to_dict()
        state["version"] = 99
        with pytest.raises(ValueError):
            estimator_from_dict(state)
        state = est.to_dict()
        state["weights"] = state["weights"][:-1]
        state["version"] = 1
        with pytest.raises(ValueError):
            estimator_from_dict(state)

    def test_default_search_interval_is_inner_percentile_range(self, rng):
        sample = make_random_sample(rng, n=200)
        est = fit(sample, h=0.3)
        lo, hi = est.default_search_interval()
        assert lo == pytest.approx(np.percentile(sample.y, 5.0))
        assert hi == pytest.approx(np.percentile(sample.y, 95.0))
