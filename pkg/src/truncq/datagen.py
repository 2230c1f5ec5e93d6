"""Simulation of the left-truncated observation scheme with analytic oracles.

A latent sample of size N is drawn as

    X_t  stationary AR(1), standard-normal innovations scaled so the
         stationary law is N(0, 1) for every dependence coefficient,
    Y_t  = m(X_t) + noise,
    T_t  iid from the truncation law, independent of everything,

and only triplets with Y >= T are kept, order preserved.  The generative
model knows its own conditional quantiles, conditional CDF and selection
probability mu = P(Y >= T), which the Monte-Carlo harness uses as ground
truth.

Reproducibility: each draw purpose (covariate innovations, noise,
truncation) uses its own stream derived from (seed, purpose index), so
enlarging one draw never perturbs the others.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, stats
from scipy.signal import lfilter

from .errors import ConfigurationError, DegenerateSampleError, GenerationError, NumericError
from .lynden_bell import ObservedSample

# name -> (function, min over R, max over R)
REGRESSION_FUNCTIONS = {
    "three_plus_sin": (lambda x: 3.0 + np.sin(x), 2.0, 4.0),
    "constant": (lambda x: np.full_like(np.asarray(x, dtype=float), 3.0), 3.0, 3.0),
}
NOISE_LAWS = ("uniform", "gaussian")
TRUNCATION_LAWS = ("uniform", "none")

_STREAM_COVARIATE, _STREAM_NOISE, _STREAM_TRUNCATION = 0, 1, 2
_BINOMIAL_SANITY_SIGMAS = 5.0


@dataclass(frozen=True)
class TruncatedDataModel:
    """Generative model: regression, noise law, AR(1) dependence, truncation.

    The default layout (m = 3 + sin, uniform(-1, 1) noise, truncation
    uniform(0, 4)) keeps the truncation support strictly left of the
    lifetime support (identifiability) while still removing a meaningful
    fraction of draws.  Gaussian noise breaks the strict support gap; such
    models are allowed but flagged ``assumption_compliant = False``.
    """

    regression: str = "three_plus_sin"
    noise: str = "uniform"
    noise_scale: float = 1.0
    ar_coefficient: float = 0.5
    truncation: str = "uniform"
    truncation_scale: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.regression not in REGRESSION_FUNCTIONS:
            raise ConfigurationError(
                f"unknown regression {self.regression!r}; expected one of {tuple(REGRESSION_FUNCTIONS)}"
            )
        if self.noise not in NOISE_LAWS:
            raise ConfigurationError(f"unknown noise law {self.noise!r}")
        if self.truncation not in TRUNCATION_LAWS:
            raise ConfigurationError(f"unknown truncation law {self.truncation!r}")
        if self.noise_scale <= 0:
            raise ConfigurationError("noise_scale must be positive")
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise ConfigurationError("ar_coefficient must lie in [0, 1)")
        if self.truncation == "uniform" and self.truncation_scale <= 0:
            raise ConfigurationError("truncation_scale must be positive")
        if self.noise == "uniform":
            # support layout: truncation starts at 0, lifetimes at a_F > 0
            if self.lifetime_lower_bound <= 0.0:
                raise ConfigurationError(
                    "uniform-noise model needs min m - noise_scale > 0 so the "
                    "lifetime support starts strictly right of the truncation support"
                )
            if self.truncation == "uniform" and self.truncation_scale > self.lifetime_upper_bound:
                raise ConfigurationError(
                    "truncation support may not extend past the lifetime support, "
                    "or the truncation law is not identifiable from observed data"
                )

    @property
    def regression_bounds(self) -> tuple[float, float]:
        _, lo, hi = REGRESSION_FUNCTIONS[self.regression]
        return lo, hi

    @property
    def lifetime_lower_bound(self) -> float:
        """inf of the lifetime support; -inf for gaussian noise."""
        lo, _ = self.regression_bounds
        return lo - self.noise_scale if self.noise == "uniform" else -math.inf

    @property
    def lifetime_upper_bound(self) -> float:
        _, hi = self.regression_bounds
        return hi + self.noise_scale if self.noise == "uniform" else math.inf

    @property
    def assumption_compliant(self) -> bool:
        """True when the lifetime support starts strictly above the truncation
        support's origin at zero (gaussian noise has unbounded support and
        breaks this; such models are for sensitivity studies only)."""
        return self.noise == "uniform"

    def regression_value(self, x):
        fn, _, _ = REGRESSION_FUNCTIONS[self.regression]
        return fn(np.asarray(x, dtype=float))

    def noise_cdf(self, u):
        u = np.asarray(u, dtype=float) / self.noise_scale
        if self.noise == "uniform":
            return np.clip((u + 1.0) / 2.0, 0.0, 1.0)
        return stats.norm.cdf(u)

    def noise_quantile(self, p: float) -> float:
        if self.noise == "uniform":
            return self.noise_scale * (2.0 * p - 1.0)
        return self.noise_scale * float(stats.norm.ppf(p))

    def noise_density(self, u):
        u = np.asarray(u, dtype=float)
        if self.noise == "uniform":
            inside = np.abs(u) <= self.noise_scale
            return np.where(inside, 0.5 / self.noise_scale, 0.0)
        return stats.norm.pdf(u / self.noise_scale) / self.noise_scale

    def truncation_cdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.truncation == "uniform":
            return np.clip(u / self.truncation_scale, 0.0, 1.0)
        return np.where(u >= 0.0, 1.0, 0.0)  # degenerate at 0

    def metadata(self) -> dict:
        return {
            "regression": self.regression,
            "noise": self.noise,
            "noise_scale": self.noise_scale,
            "ar_coefficient": self.ar_coefficient,
            "truncation": self.truncation,
            "truncation_scale": self.truncation_scale,
            "seed": self.seed,
            "assumption_compliant": self.assumption_compliant,
        }


@dataclass(frozen=True)
class GeneratedDataset:
    """An observed sample plus the latent metadata only simulation knows."""

    observed: ObservedSample
    latent_size: int
    true_mu: float
    model: TruncatedDataModel

    @property
    def observed_ratio(self) -> float:
        return self.observed.n / self.latent_size


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, purpose]))


def latent_sample(model: TruncatedDataModel, latent_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw the latent (x, y, t) arrays before truncation selection."""
    rho = model.ar_coefficient
    z = _stream(model.seed, _STREAM_COVARIATE).standard_normal(latent_n)
    if rho > 0.0:
        w = math.sqrt(1.0 - rho * rho) * z
        w[0] = z[0]  # start from the stationary N(0, 1) law
        x = lfilter([1.0], [1.0, -rho], w)
    else:
        x = z
    eps = _stream(model.seed, _STREAM_NOISE)
    if model.noise == "uniform":
        noise = eps.uniform(-model.noise_scale, model.noise_scale, latent_n)
    else:
        noise = model.noise_scale * eps.standard_normal(latent_n)
    y = model.regression_value(x) + noise
    tr = _stream(model.seed, _STREAM_TRUNCATION)
    if model.truncation == "uniform":
        t = tr.uniform(0.0, model.truncation_scale, latent_n)
    else:
        t = np.zeros(latent_n)
    return x, y, t


def generate(model: TruncatedDataModel, latent_n: int) -> GeneratedDataset:
    """Simulate the observation scheme and keep the selected triplets."""
    if latent_n < 10:
        raise ConfigurationError("latent_n must be at least 10")
    x, y, t = latent_sample(model, latent_n)
    keep = y >= t
    n = int(keep.sum())
    if n < 2:
        raise DegenerateSampleError(
            f"only {n} of {latent_n} draws survived truncation; resample with a larger "
            "latent size or weaker truncation"
        )
    mu = true_mu(model)
    if 0.0 < mu < 1.0:
        z_stat = abs(n - latent_n * mu) / math.sqrt(latent_n * mu * (1.0 - mu))
        if z_stat >= _BINOMIAL_SANITY_SIGMAS:
            raise GenerationError(
                f"observed count {n} is {z_stat:.2f} binomial standard deviations from "
                f"N*mu = {latent_n * mu:.1f}; generator and oracle disagree"
            )
    observed = ObservedSample(x=x[keep], y=y[keep], t=t[keep], latent_size=latent_n)
    return GeneratedDataset(observed=observed, latent_size=latent_n, true_mu=mu, model=model)


def true_quantile(model: TruncatedDataModel, x: float, p: float) -> float:
    """Conditional quantile of the generative law: m(x) + noise quantile."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return float(model.regression_value(x)) + model.noise_quantile(p)


def true_conditional_cdf(model: TruncatedDataModel, x: float, y: float) -> float:
    """Conditional CDF of the generative law at (x, y)."""
    return float(model.noise_cdf(y - float(model.regression_value(x))))


def true_mu(model: TruncatedDataModel) -> float:
    """Selection probability P(Y >= T) = integral of G d(marginal law of Y).

    Computed by adaptive quadrature over the stationary covariate law and
    the noise law; the AR(1) coefficient does not enter because the
    stationary marginal of the covariate is N(0, 1) for every coefficient.
    The seed plays no role either, so results are cached per model shape.
    """
    return _true_mu_cached(dataclasses.replace(model, seed=0))


@functools.lru_cache(maxsize=64)
def _true_mu_cached(model: TruncatedDataModel) -> float:
    if model.truncation == "none":
        if model.lifetime_lower_bound >= 0.0:
            return 1.0
        # gaussian noise can dip below zero
        return _quadrature_mu(model)
    if model.truncation_scale <= model.lifetime_lower_bound:
        return 1.0  # G == 1 on the whole lifetime support
    return _quadrature_mu(model)


def _quadrature_mu(model: TruncatedDataModel) -> float:
    def inner(xv: float) -> float:
        m = float(model.regression_value(xv))
        if model.truncation == "none":
            # E[1{m + eps >= 0}] in closed form, keeps the integrand smooth
            return 1.0 - float(model.noise_cdf(-m))

        def integrand(e: float) -> float:
            return float(model.truncation_cdf(m + e)) * float(model.noise_density(e))

        if model.noise == "uniform":
            lims = (-model.noise_scale, model.noise_scale)
        else:
            lims = (-8.0 * model.noise_scale, 8.0 * model.noise_scale)
        val, _ = integrate.quad(integrand, *lims, epsabs=1e-11, epsrel=1e-9, limit=200)
        return val

    try:
        val, err = integrate.quad(
            lambda xv: inner(xv) * stats.norm.pdf(xv), -9.0, 9.0,
            epsabs=1e-10, epsrel=1e-8, limit=200,
        )
    except Exception as exc:  # pragma: no cover - scipy signals hard failures rarely
        raise NumericError(f"selection-probability quadrature failed: {exc}") from exc
    if not math.isfinite(val) or err > 1e-6 * max(abs(val), 1e-12):
        raise NumericError("selection-probability quadrature did not converge")
    return min(1.0, max(0.0, val))


# -- dataset CSV + sidecar I/O ---------------------------------------------

def write_dataset_csv(sample: ObservedSample, path: str | Path) -> None:
    """Write observed triplets as CSV with header x,y,t."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "t"])
        for xv, yv, tv in zip(sample.x, sample.y, sample.t):
            writer.writerow([repr(float(xv)), repr(float(yv)), repr(float(tv))])


def read_dataset_csv(path: str | Path, latent_size: int | None = None) -> ObservedSample:
    """Read an x,y,t CSV produced by this package or any external source."""
    xs, ys, ts = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["x", "y", "t"]:
            raise ValueError(f"{path}: expected CSV header 'x,y,t'")
        for row in reader:
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
            ts.append(float(row["t"]))
    return ObservedSample(x=np.array(xs), y=np.array(ys), t=np.array(ts), latent_size=latent_size)


def write_dataset_metadata(dataset: GeneratedDataset, path: str | Path) -> None:
    """Sidecar JSON: model parameters, seed, latent size, oracle mu."""
    meta = {
        "model": dataset.model.metadata(),
        "latent_size": dataset.latent_size,
        "observed_n": dataset.observed.n,
        "observed_ratio": dataset.observed_ratio,
        "true_mu": dataset.true_mu,
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
