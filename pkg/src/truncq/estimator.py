"""Truncation-corrected kernel estimation of the conditional CDF and quantiles.

The fitted object carries per-record weights w_i = 1/G_n(y_i) from the
product-limit estimator.  Records with G_n(y_i) = 0 are dropped from every
weighted sum at fit time (the skip rule).  With K the covariate kernel,
H the smoothing distribution and h the bandwidth:

    observed-density   (1/(n h)) * sum_i K((x - x_i)/h)            (all records)
    marginal density   (mu_n/(n h)) * sum_i w_i K_i                 (active)
    joint part         (mu_n/(n h)) * sum_i w_i K_i H((y - y_i)/h)  (active)
    conditional CDF    sum_i w_i K_i H_i / sum_i w_i K_i            (active)

mu_n cancels in the conditional CDF, which is therefore computed directly
from the weighted sums.  A zero denominator yields 0 under the 0/0 = 0
convention; callers can distinguish that from a genuine zero CDF through
``has_local_data``.  Quantiles invert the CDF by bisection on a supplied
bracket, exact for a monotone continuous estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateWeightsError,
    NoLocalDataError,
    QuantileNotBracketedError,
)
from .kernels import KernelSpec, SmootherSpec, kernel_eval, smoother_eval
from .lynden_bell import ObservedSample, truncation_probability

SERIALIZATION_FORMAT = "truncq.estimator"
SERIALIZATION_VERSION = 1


@dataclass(frozen=True)
class QuantileQuery:
    """One conditional-quantile request: level p at covariate x.

    The search interval must bracket the level; tolerance defaults to
    1e-8 times the interval width.
    """

    x: float
    p: float
    search_interval: tuple[float, float]
    tolerance: float | None = None

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("quantile level p must lie strictly inside (0, 1)")
        a, b = self.search_interval
        if not a < b:
            raise ValueError("search interval must satisfy a < b")
        if self.tolerance is not None and self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    @property
    def resolved_tolerance(self) -> float:
        a, b = self.search_interval
        return self.tolerance if self.tolerance is not None else 1e-8 * (b - a)


@dataclass(frozen=True)
class ConditionalCdfEstimator:
    """Fitted conditional-CDF estimator; immutable, queries are pure."""

    sample: ObservedSample
    kernel: KernelSpec
    smoother: SmootherSpec
    h: float
    weights: np.ndarray
    active: np.ndarray
    mu_hat: float
    mu_invariance_spread: float
    _x_active: np.ndarray = field(repr=False)
    _y_active: np.ndarray = field(repr=False)
    _w_active: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.sample.n

    @property
    def n_active(self) -> int:
        return len(self._y_active)

    # -- density and CDF queries -------------------------------------------

    def density_observed(self, x: float) -> float:
        """Kernel density of the observed covariates, unweighted."""
        u = (x - self.sample.x) / self.h
        return float(np.sum(kernel_eval(self.kernel, u))) / (self.n * self.h)

    def density_marginal(self, x: float) -> float:
        """Truncation-corrected estimate of the latent covariate density."""
        u = (x - self._x_active) / self.h
        s = float(np.dot(self._w_active, kernel_eval(self.kernel, u)))
        return self.mu_hat * s / (self.n * self.h)

    def joint_part(self, x: float, y: float) -> float:
        """Estimate of the joint quantity F_1(x, y) = d/dx F(x, y)."""
        kvals = kernel_eval(self.kernel, (x - self._x_active) / self.h)
        hvals = smoother_eval(self.smoother, (y - self._y_active) / self.h)
        s = float(np.sum(self._w_active * kvals * hvals))
        return self.mu_hat * s / (self.n * self.h)

    def has_local_data(self, x: float) -> bool:
        """True when the weighted kernel mass at x is nonzero."""
        kvals = kernel_eval(self.kernel, (x - self._x_active) / self.h)
        return float(np.dot(self._w_active, kvals)) > 0.0

    def conditional_cdf(self, x: float, y: float) -> float:
        """F_n(y | x); 0 when there is no kernel mass at x (0/0 = 0)."""
        wk = self._w_active * kernel_eval(self.kernel, (x - self._x_active) / self.h)
        denom = float(np.sum(wk))
        if denom <= 0.0:
            return 0.0
        hvals = smoother_eval(self.smoother, (y - self._y_active) / self.h)
        return min(1.0, float(np.dot(wk, hvals)) / denom)

    # -- vectorized grid kernels (shared by scalar and harness paths) ------

    def _weighted_kernel_rows(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """w_i K((x - x_i)/h) rows for each query x; also the row sums."""
        u = (xs[:, None] - self._x_active[None, :]) / self.h
        wk = self._w_active[None, :] * kernel_eval(self.kernel, u)
        return wk, wk.sum(axis=1)

    def cdf_grid(self, xs, ys) -> np.ndarray:
        """Matrix F_n(ys[j] | xs[i]) with the 0/0 = 0 convention."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        wk, denom = self._weighted_kernel_rows(xs)
        hmat = smoother_eval(self.smoother, (ys[:, None] - self._y_active[None, :]) / self.h)
        num = wk @ hmat.T
        safe = np.where(denom > 0.0, denom, 1.0)
        out = np.where(denom[:, None] > 0.0, num / safe[:, None], 0.0)
        return np.clip(out, 0.0, 1.0)

    def quantile_grid(self, xs, p: float, search_interval: tuple[float, float],
                      tolerance: float | None = None):
        """Invert the CDF at level p for every x in xs.

        Returns (values, status) arrays; status 0 means success, 1 no local
        data, 2 level not bracketed on the interval.  Failed entries carry
        NaN values.
        """
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        a, b = search_interval
        if not a < b:
            raise ValueError("search interval must satisfy a < b")
        tol = tolerance if tolerance is not None else 1e-8 * (b - a)
        wk, denom = self._weighted_kernel_rows(xs)
        ok = denom > 0.0
        safe = np.where(ok, denom, 1.0)

        def cdf_at(yv):
            hm = smoother_eval(self.smoother, (yv[:, None] - self._y_active[None, :]) / self.h)
            return np.sum(wk * hm, axis=1) / safe

        f_lo = cdf_at(np.full_like(xs, a))
        f_hi = cdf_at(np.full_like(xs, b))
        status = np.zeros(len(xs), dtype=int)
        status[~ok] = 1
        bracketed = (f_lo <= p) & (p <= f_hi)
        status[ok & ~bracketed] = 2

        lo = np.full_like(xs, a)
        hi = np.full_like(xs, b)
        # exact-hit at the left endpoint: inf{y : F >= p} is a itself
        hi = np.where(f_lo >= p, lo, hi)
        iters = min(100, max(1, math.ceil(math.log2((b - a) / tol))))
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            go_hi = cdf_at(mid) >= p
            hi = np.where(go_hi, mid, hi)
            lo = np.where(go_hi, lo, mid)
        values = np.where(status == 0, hi, np.nan)
        return values, status, (f_lo, f_hi)

    def conditional_quantile(self, query: QuantileQuery) -> float:
        """inf{y : F_n(y|x) >= p} on the query interval, by bisection."""
        values, status, (f_lo, f_hi) = self.quantile_grid(
            np.array([query.x]), query.p, query.search_interval, query.resolved_tolerance
        )
        if status[0] == 1:
            raise NoLocalDataError(f"no kernel mass at x={query.x:.6g}")
        if status[0] == 2:
            raise QuantileNotBracketedError(query.p, float(f_lo[0]), float(f_hi[0]))
        return float(values[0])

    def predict_median(self, x_new: float, search: tuple[float, float],
                       tol: float | None = None) -> float:
        """Median-based point prediction of the response at a new covariate."""
        return self.conditional_quantile(
            QuantileQuery(x=x_new, p=0.5, search_interval=search, tolerance=tol)
        )

    def sup_error_cdf(self, truth, xs, ys) -> float:
        """Max over the grid of |F_n(y|x) - truth(x, y)|.

        Pointwise evaluation on both sides keeps the self-comparison
        exactly zero; bulk consumers wanting speed use ``cdf_grid``.
        """
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        if len(xs) == 0 or len(ys) == 0:
            raise ValueError("grids must be nonempty")
        worst = 0.0
        for xv in xs:
            for yv in ys:
                worst = max(worst, abs(self.conditional_cdf(xv, yv) - float(truth(xv, yv))))
        return worst

    def default_search_interval(self) -> tuple[float, float]:
        """Empirical 5th-95th percentile range of the observed lifetimes."""
        lo, hi = np.percentile(self.sample.y, [5.0, 95.0])
        if not lo < hi:  # tiny or constant samples
            lo, hi = float(self.sample.y.min()) - self.h, float(self.sample.y.max()) + self.h
        return float(lo), float(hi)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        """Self-describing state for the fit-then-query workflow."""
        return {
            "format": SERIALIZATION_FORMAT,
            "version": SERIALIZATION_VERSION,
            "kernel": self.kernel.family,
            "smoother": self.smoother.family,
            "h": self.h,
            "mu_hat": self.mu_hat,
            "mu_invariance_spread": self.mu_invariance_spread,
            "weights": [float(w) for w in self.weights],
            "active": [bool(a) for a in self.active],
            "sample": {
                "x": [float(v) for v in self.sample.x],
                "y": [float(v) for v in self.sample.y],
                "t": [float(v) for v in self.sample.t],
                "latent_size": self.sample.latent_size,
            },
        }


def estimator_from_dict(state: dict) -> ConditionalCdfEstimator:
    """Rebuild a fitted estimator from its serialized state."""
    if state.get("format") != SERIALIZATION_FORMAT:
        raise ValueError("not a serialized estimator document")
    if state.get("version") != SERIALIZATION_VERSION:
        raise ValueError(f"unsupported estimator document version {state.get('version')!r}")
    sample = ObservedSample(
        x=np.asarray(state["sample"]["x"], dtype=float),
        y=np.asarray(state["sample"]["y"], dtype=float),
        t=np.asarray(state["sample"]["t"], dtype=float),
        latent_size=state["sample"].get("latent_size"),
    )
    weights = np.asarray(state["weights"], dtype=float)
    active = np.asarray(state["active"], dtype=bool)
    if len(weights) != sample.n or len(active) != sample.n:
        raise ValueError("weight arrays do not match the sample length")
    return ConditionalCdfEstimator(
        sample=sample,
        kernel=KernelSpec(state["kernel"]),
        smoother=SmootherSpec(state["smoother"]),
        h=float(state["h"]),
        weights=weights,
        active=active,
        mu_hat=float(state["mu_hat"]),
        mu_invariance_spread=float(state["mu_invariance_spread"]),
        _x_active=sample.x[active],
        _y_active=sample.y[active],
        _w_active=weights[active],
    )


def fit(sample: ObservedSample, kernel: KernelSpec | None = None,
        smoother: SmootherSpec | None = None, h: float = 0.5) -> ConditionalCdfEstimator:
    """Fit the estimator: one product-limit pass, weights cached.

    Raises DegenerateWeightsError when every record has G_n(y_i) = 0, in
    which case no weighted sum can be formed.
    """
    kernel = kernel or KernelSpec()
    smoother = smoother or SmootherSpec()
    if h <= 0:
        raise ValueError("bandwidth h must be positive")
    trunc = truncation_probability(sample)
    g_at_y = trunc.g_curve.evaluate(sample.y)
    g_at_y = np.atleast_1d(g_at_y)
    active = g_at_y > 0.0
    if not active.any():
        raise DegenerateWeightsError(
            "degenerate truncation weights: G_n vanishes at every observed lifetime"
        )
    weights = np.where(active, 1.0 / np.where(active, g_at_y, 1.0), 0.0)
    return ConditionalCdfEstimator(
        sample=sample,
        kernel=kernel,
        smoother=smoother,
        h=float(h),
        weights=weights,
        active=active,
        mu_hat=trunc.mu_hat,
        mu_invariance_spread=trunc.mu_invariance_spread,
        _x_active=sample.x[active],
        _y_active=sample.y[active],
        _w_active=weights[active],
    )
