"""Kernel, smoother and bandwidth checks against quadrature oracles."""

import math

import numpy as np
import pytest
from scipy import integrate

from truncq.errors import ConfigurationError
from truncq.kernels import (
    KERNEL_FAMILIES,
    SMOOTHER_FAMILIES,
    BandwidthSchedule,
    KernelSpec,
    SmootherSpec,
    bandwidth,
    kernel_eval,
    smoother_density,
    smoother_eval,
)

QUAD_TOL = 1e-8


def _quad(f, lo, hi):
    val, _ = integrate.quad(f, lo, hi, limit=200)
    return val


@pytest.mark.parametrize("family", KERNEL_FAMILIES)
def test_kernel_normalization_and_moments(family):
    spec = KernelSpec(family)
    lim = 1.0 if math.isfinite(spec.support_radius) else 12.0
    assert abs(_quad(lambda u: kernel_eval(spec, u), -lim, lim) - 1.0) < QUAD_TOL
    assert abs(_quad(lambda u: u * kernel_eval(spec, u), -lim, lim)) < QUAD_TOL
    second = _quad(lambda u: u * u * kernel_eval(spec, u), -lim, lim)
    assert 0.0 < second < math.inf


@pytest.mark.parametrize("family", KERNEL_FAMILIES)
def test_kernel_symmetric_and_nonnegative(family):
    spec = KernelSpec(family)
    grid = np.linspace(-3, 3, 601)
    vals = kernel_eval(spec, grid)
    assert np.all(vals >= 0.0)
    np.testing.assert_allclose(vals, kernel_eval(spec, -grid), rtol=0, atol=0)


def test_kernel_point_values():
    assert kernel_eval(KernelSpec("epanechnikov"), 0.0) == 0.75
    assert kernel_eval(KernelSpec("epanechnikov"), 1.5) == 0.0
    # independent evaluation of the normal density at zero
    assert abs(kernel_eval(KernelSpec("gaussian"), 0.0) - 1.0 / math.sqrt(2 * math.pi)) < 1e-12


def test_kernel_vanishing_tails():
    # |u| K(u) -> 0 for the unbounded family; compact families are exactly zero
    u = np.array([10.0, 20.0, 40.0])
    assert np.all(u * kernel_eval(KernelSpec("gaussian"), u) < 1e-20)
    assert np.all(kernel_eval(KernelSpec("biweight"), u) == 0.0)


@pytest.mark.parametrize("family", SMOOTHER_FAMILIES)
def test_smoother_is_a_distribution(family):
    spec = SmootherSpec(family)
    grid = np.linspace(-1.5, 1.5, 301)
    vals = smoother_eval(spec, grid)
    assert np.all((0.0 <= vals) & (vals <= 1.0))
    assert np.all(np.diff(vals) >= 0.0)
    assert smoother_eval(spec, -1.0) == 0.0
    assert smoother_eval(spec, 1.0) == 1.0
    assert smoother_eval(spec, 0.0) == 0.5


@pytest.mark.parametrize("family", SMOOTHER_FAMILIES)
def test_smoother_matches_density_quadrature(family):
    spec = SmootherSpec(family)
    for u in np.linspace(-1.2, 1.2, 100):
        target = _quad(lambda v: smoother_density(spec, v), -1.0, min(u, 1.0)) if u > -1.0 else 0.0
        assert abs(smoother_eval(spec, u) - target) < QUAD_TOL


def test_smoother_frozen_value():
    # quadrature oracle value of the biweight antiderivative at 0.5
    assert abs(smoother_eval(SmootherSpec("integrated_biweight"), 0.5) - 0.896484375) < 1e-12
    assert abs(smoother_eval(SmootherSpec("integrated_triweight"), 0.25) - 0.7569789886474609) < 1e-12


@pytest.mark.parametrize("family", SMOOTHER_FAMILIES)
def test_smoother_density_properties(family):
    spec = SmootherSpec(family)
    grid = np.linspace(-0.999, 0.999, 401)
    vals = smoother_density(spec, grid)
    assert np.all(vals > 0.0)  # positive on the open support
    assert np.all(vals <= 35.0 / 32.0 + 1e-12)  # bounded
    assert smoother_density(spec, 1.5) == 0.0  # compact support


@pytest.mark.parametrize("make,bound", [
    (lambda: KernelSpec("epanechnikov"), 1.6),
    (lambda: KernelSpec("biweight"), 1.6),
    (lambda: KernelSpec("gaussian"), 1.6),
    (lambda: SmootherSpec("integrated_biweight"), 1.1),
    (lambda: SmootherSpec("integrated_triweight"), 1.2),
])
def test_lipschitz_bound_on_dense_grid(make, bound):
    spec = make()
    evaluate = kernel_eval if isinstance(spec, KernelSpec) else smoother_eval
    grid = np.linspace(-2.0, 2.0, 4001)
    vals = np.asarray(evaluate(spec, grid))
    ratios = np.abs(np.diff(vals)) / np.diff(grid)
    assert ratios.max() <= bound


def test_bandwidth_power_law_values():
    assert bandwidth(BandwidthSchedule("power_law", c=1.0, exponent=0.2), 32) == pytest.approx(0.5, abs=1e-15)
    assert bandwidth(BandwidthSchedule("power_law", c=2.0, exponent=0.2), 32) == pytest.approx(1.0, abs=1e-15)


def test_bandwidth_rule_of_thumb():
    h = bandwidth(BandwidthSchedule("rule_of_thumb"), 1000, sample_dispersion=1.0)
    # independent evaluation of 1.06 * 1000 ** (-1/5)
    assert abs(h - 0.2662599617400155) < 1e-12
    with pytest.raises(ConfigurationError):
        bandwidth(BandwidthSchedule("rule_of_thumb"), 1000)
    with pytest.raises(ConfigurationError):
        bandwidth(BandwidthSchedule("rule_of_thumb"), 1000, sample_dispersion=0.0)


def test_bandwidth_explicit_ignores_n():
    sched = BandwidthSchedule("explicit", c=0.37)
    assert sched.value(10) == 0.37
    assert sched.value(100000) == 0.37


def test_bandwidth_monotonicity():
    ns = [2, 5, 10, 100, 1000, 100000]
    for a in (0.2, 1.0 / 3.0):
        sched = BandwidthSchedule("power_law", c=1.3, exponent=a)
        hs = [sched.value(n) for n in ns]
        assert all(h > 0 for h in hs)
        assert all(h1 > h2 for h1, h2 in zip(hs, hs[1:]))
        ratios = [math.log(n) / (n * h) for n, h in zip(ns, hs)]
        assert all(r1 > r2 for r1, r2 in zip(ratios[1:], ratios[2:]))
        assert ratios[-1] < 0.01
    # increasing in c
    assert BandwidthSchedule(c=2.0).value(50) > BandwidthSchedule(c=1.0).value(50)


def test_bandwidth_rejects_small_n():
    with pytest.raises(ConfigurationError):
        bandwidth(BandwidthSchedule(), 1)


def test_invalid_specs_rejected():
    with pytest.raises(ConfigurationError):
        KernelSpec("triangular")
    with pytest.raises(ConfigurationError):
        SmootherSpec("gaussian")
    with pytest.raises(ConfigurationError):
        BandwidthSchedule("adaptive")
    with pytest.raises(ConfigurationError):
        BandwidthSchedule("power_law", c=-1.0)
    with pytest.raises(ConfigurationError):
        BandwidthSchedule("power_law", exponent=1.5)


def test_support_radius():
    assert KernelSpec("epanechnikov").support_radius == 1.0
    assert math.isinf(KernelSpec("gaussian").support_radius)
    assert SmootherSpec().support_radius == 1.0
