"""Kernels, smoothing distributions and bandwidth schedules.

The covariate kernel is a symmetric second-order probability density.  The
smoothing distribution replaces the indicator ``1{Y <= y}`` in the
conditional CDF estimate; its density is continuously differentiable,
bounded and compactly supported.  Both are evaluated from closed forms,
never by runtime quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

KERNEL_FAMILIES = ("epanechnikov", "biweight", "gaussian")
SMOOTHER_FAMILIES = ("integrated_biweight", "integrated_triweight")
BANDWIDTH_RULES = ("explicit", "power_law", "rule_of_thumb")

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KernelSpec:
    """A named covariate kernel.

    ``support_radius`` is 1 for the compact families and ``inf`` for the
    gaussian.  All families integrate to one, are symmetric and have zero
    first moment.
    """

    family: str = "epanechnikov"

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ConfigurationError(
                f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}"
            )

    @property
    def support_radius(self) -> float:
        return math.inf if self.family == "gaussian" else 1.0

    def __call__(self, u):
        return kernel_eval(self, u)


@dataclass(frozen=True)
class SmootherSpec:
    """A named smoothing distribution H with density ``H^(1)``.

    ``integrated_biweight`` integrates the density (15/16)(1-u^2)^2 on
    [-1, 1]; ``integrated_triweight`` integrates (35/32)(1-u^2)^3.  Both
    densities are C^1, positive on the open support, bounded and compact.
    """

    family: str = "integrated_biweight"

    def __post_init__(self):
        if self.family not in SMOOTHER_FAMILIES:
            raise ConfigurationError(
                f"unknown smoother family {self.family!r}; expected one of {SMOOTHER_FAMILIES}"
            )

    @property
    def support_radius(self) -> float:
        return 1.0

    def cdf(self, u):
        return smoother_eval(self, u)

    def density(self, u):
        return smoother_density(self, u)


@dataclass(frozen=True)
class BandwidthSchedule:
    """Sample-size to bandwidth mapping h(n).

    rules:
      * ``explicit``      h = c for every n
      * ``power_law``     h = c * n ** (-exponent)
      * ``rule_of_thumb`` h = 1.06 * dispersion * n ** (-1/5)

    The default exponent 1/5 keeps ``log n / (n h) -> 0`` while shrinking
    h, the behaviour the estimator's rate analysis assumes.
    """

    rule: str = "power_law"
    c: float = 1.0
    exponent: float = 0.2

    def __post_init__(self):
        if self.rule not in BANDWIDTH_RULES:
            raise ConfigurationError(
                f"unknown bandwidth rule {self.rule!r}; expected one of {BANDWIDTH_RULES}"
            )
        if self.c <= 0:
            raise ConfigurationError("bandwidth constant c must be positive")
        if self.rule == "power_law" and not 0.0 < self.exponent < 1.0:
            raise ConfigurationError("power_law exponent must lie in (0, 1)")

    def value(self, n: int, sample_dispersion: float | None = None) -> float:
        return bandwidth(self, n, sample_dispersion)


def kernel_eval(spec: KernelSpec, u):
    """Evaluate the kernel density K(u).  Total: zero outside compact support."""
    u = np.asarray(u, dtype=float)
    if spec.family == "epanechnikov":
        out = np.where(np.abs(u) <= 1.0, 0.75 * np.maximum(0.0, 1.0 - u * u), 0.0)
    elif spec.family == "biweight":
        s = np.maximum(0.0, 1.0 - u * u)
        out = np.where(np.abs(u) <= 1.0, (15.0 / 16.0) * s * s, 0.0)
    else:  # gaussian
        out = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    return out if out.ndim else float(out)


def smoother_eval(spec: SmootherSpec, u):
    """Evaluate the smoothing distribution H(u), clipped to [0, 1] exactly.

    Closed-form antiderivative of the density; the clip keeps float
    round-off from ever leaking outside the unit interval, which downstream
    monotonicity arguments rely on.
    """
    u = np.asarray(u, dtype=float)
    v = np.clip(u, -1.0, 1.0)
    if spec.family == "integrated_biweight":
        out = 0.5 + (15.0 / 16.0) * (v - (2.0 / 3.0) * v**3 + 0.2 * v**5)
    else:  # integrated_triweight
        out = 0.5 + (35.0 / 32.0) * (v - v**3 + 0.6 * v**5 - v**7 / 7.0)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def smoother_density(spec: SmootherSpec, u):
    """Evaluate the smoothing density H^(1)(u)."""
    u = np.asarray(u, dtype=float)
    s = np.maximum(0.0, 1.0 - u * u)
    if spec.family == "integrated_biweight":
        out = np.where(np.abs(u) <= 1.0, (15.0 / 16.0) * s * s, 0.0)
    else:
        out = np.where(np.abs(u) <= 1.0, (35.0 / 32.0) * s * s * s, 0.0)
    return out if out.ndim else float(out)


def bandwidth(schedule: BandwidthSchedule, n: int, sample_dispersion: float | None = None) -> float:
    """Resolve the bandwidth for a sample of size n.

    The explicit rule ignores n entirely (any n >= 1); the data-driven
    rules need n >= 2.
    """
    if schedule.rule == "explicit":
        if n < 1:
            raise ConfigurationError(f"bandwidth needs n >= 1, got n={n}")
        return schedule.c
    if n < 2:
        raise ConfigurationError(f"bandwidth needs n >= 2, got n={n}")
    if schedule.rule == "power_law":
        return schedule.c * float(n) ** (-schedule.exponent)
    if sample_dispersion is None:
        raise ConfigurationError("rule_of_thumb bandwidth requires a sample dispersion")
    if sample_dispersion <= 0:
        raise ConfigurationError("sample dispersion must be positive")
    return 1.06 * sample_dispersion * float(n) ** (-0.2)
