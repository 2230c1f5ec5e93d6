"""Replicated Monte-Carlo experiments over a ladder of sample sizes.

Each replication draws a fresh dataset, fits the estimator with the
scheduled bandwidth, and records three errors against the generative
oracles: |mu_n - mu|, the sup over an (x, y) grid of the conditional-CDF
error, and the sup over the x grid of the quantile error at each level.
Means per latent size are regressed on log observed size to produce
empirical convergence slopes, compared against the theoretical envelope
max{sqrt(log n / (n h)), h^2}.

Replications are independent jobs keyed by (latent size, replication
index); results are reduced in that order, so output is identical for any
worker count.
"""

from __future__ import annotations

import math
import multiprocessing
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import TruncatedDataModel, generate, true_mu
from .errors import DegenerateSampleError, DegenerateWeightsError, GenerationError, RateFitError
from .estimator import fit
from .kernels import BandwidthSchedule, KernelSpec, SmootherSpec

MIN_SIZES_FOR_SLOPE = 4

METRIC_MU = "mu_error"
METRIC_CDF = "cdf_sup_error"


def quantile_metric_name(p: float) -> str:
    return f"quantile_sup_error_p{p:g}"


@dataclass(frozen=True)
class GridSpec:
    """An inclusive evenly spaced grid."""

    lo: float
    hi: float
    count: int = 41

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")
        if self.count < 1:
            raise ValueError("grid needs at least one point")

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a rate experiment needs; deterministic given base_seed."""

    model: TruncatedDataModel
    sizes: tuple[int, ...] = (500, 1000, 2000, 4000, 8000)
    replications: int = 200
    bandwidth: BandwidthSchedule = BandwidthSchedule()
    kernel: KernelSpec = KernelSpec()
    smoother: SmootherSpec = SmootherSpec()
    p_levels: tuple[float, ...] = (0.5,)
    x_grid: GridSpec = GridSpec(-1.0, 1.0, 41)
    y_grid: GridSpec = GridSpec(1.5, 4.5, 41)
    quantile_tolerance: float | None = None
    base_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if len(self.sizes) < 1 or any(s < 10 for s in self.sizes):
            raise ValueError("sizes must be positive latent counts (>= 10)")
        if list(self.sizes) != sorted(set(self.sizes)):
            raise ValueError("sizes must be strictly increasing")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if any(not 0.0 < p < 1.0 for p in self.p_levels):
            raise ValueError("p levels must lie inside (0, 1)")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        # the lifetime grid must sit strictly inside the support interior;
        # the covariate marginal is positive everywhere, so x_grid is free
        lo = self.model.lifetime_lower_bound
        hi = self.model.lifetime_upper_bound
        if self.y_grid.lo <= lo or self.y_grid.hi >= hi:
            raise ValueError(
                f"y_grid [{self.y_grid.lo}, {self.y_grid.hi}] must lie strictly inside "
                f"the lifetime support ({lo}, {hi})"
            )

    def metric_names(self) -> list[str]:
        return [METRIC_MU, METRIC_CDF] + [quantile_metric_name(p) for p in self.p_levels]


@dataclass(frozen=True)
class ReplicationRecord:
    latent_n: int
    rep_index: int
    n_observed: int
    h: float
    errors: dict[str, float] = field(default_factory=dict)
    skipped: bool = False
    skip_reason: str | None = None


@dataclass(frozen=True)
class SizeAggregate:
    metric: str
    latent_n: int
    n_observed_mean: float
    h_mean: float
    error_mean: float
    error_median: float
    error_se: float
    replications_used: int


@dataclass(frozen=True)
class SlopeFit:
    metric: str
    slope: float
    stderr: float


@dataclass(frozen=True)
class RateReport:
    config: ExperimentConfig
    records: list[ReplicationRecord]
    aggregates: list[SizeAggregate]
    slopes: list[SlopeFit]
    skipped: int
    slope_message: str | None = None

    def tidy_rows(self) -> list[dict]:
        """One row per replication per metric; skips carry a None value."""
        rows = []
        for rec in self.records:
            for metric in self.config.metric_names():
                rows.append({
                    "latent_n": rec.latent_n,
                    "rep_index": rec.rep_index,
                    "n_observed": rec.n_observed,
                    "metric": metric,
                    "value": rec.errors.get(metric),
                    "skipped": rec.skipped,
                    "skip_reason": rec.skip_reason or "",
                })
        return rows

    def summary_rows(self) -> list[dict]:
        """Per (metric, size) aggregates with the fitted slope columns."""
        slope_by_metric = {s.metric: s for s in self.slopes}
        rows = []
        for agg in self.aggregates:
            s = slope_by_metric.get(agg.metric)
            rows.append({
                "metric": agg.metric,
                "latent_n": agg.latent_n,
                "n_observed_mean": agg.n_observed_mean,
                "h_mean": agg.h_mean,
                "error_mean": agg.error_mean,
                "error_median": agg.error_median,
                "error_se": agg.error_se,
                "replications_used": agg.replications_used,
                "theoretical_rate": theoretical_rate(max(2, round(agg.n_observed_mean)), agg.h_mean),
                "slope": s.slope if s else None,
                "slope_stderr": s.stderr if s else None,
            })
        return rows


def replication_seed(base_seed: int, latent_n: int, rep_index: int) -> int:
    """Stable per-replication seed; adding sizes or reps never shifts others."""
    ss = np.random.SeedSequence([base_seed, latent_n, rep_index])
    return int(ss.generate_state(1, np.uint64)[0])


def theoretical_rate(n: int, h: float) -> float:
    """The rate envelope max{sqrt(log n / (n h)), h^2}."""
    if n < 2:
        raise ValueError("theoretical rate needs n >= 2")
    if h <= 0:
        raise ValueError("theoretical rate needs h > 0")
    return max(math.sqrt(math.log(n) / (n * h)), h * h)


def run_replication(config: ExperimentConfig, latent_n: int, rep_index: int) -> ReplicationRecord:
    """Generate, fit and score one replication; deterministic given seeds."""
    seed = replication_seed(config.base_seed, latent_n, rep_index)
    model = replace(config.model, seed=seed)
    try:
        dataset = generate(model, latent_n)
        sample = dataset.observed
        h = config.bandwidth.value(sample.n, sample_dispersion=float(np.std(sample.x)))
        est = fit(sample, config.kernel, config.smoother, h)
    except (DegenerateSampleError, GenerationError, DegenerateWeightsError) as exc:
        return ReplicationRecord(latent_n=latent_n, rep_index=rep_index, n_observed=0,
                                 h=float("nan"), skipped=True, skip_reason=str(exc))

    errors: dict[str, float] = {METRIC_MU: abs(est.mu_hat - dataset.true_mu)}
    xs = config.x_grid.points()
    ys = config.y_grid.points()
    m_at_xs = model.regression_value(xs)
    true_grid = model.noise_cdf(ys[None, :] - m_at_xs[:, None])
    errors[METRIC_CDF] = float(np.abs(est.cdf_grid(xs, ys) - true_grid).max())

    bracket = (config.y_grid.lo, config.y_grid.hi)
    for p in config.p_levels:
        values, status, _ = est.quantile_grid(xs, p, bracket, config.quantile_tolerance)
        if np.any(status != 0):
            reason = ("no local data" if np.any(status == 1) else "quantile not bracketed")
            bad = xs[np.argmax(status != 0)]
            return ReplicationRecord(
                latent_n=latent_n, rep_index=rep_index, n_observed=sample.n, h=h,
                skipped=True, skip_reason=f"{reason} at x={bad:.4g}, p={p}",
            )
        truth = m_at_xs + model.noise_quantile(p)
        errors[quantile_metric_name(p)] = float(np.abs(values - truth).max())

    return ReplicationRecord(latent_n=latent_n, rep_index=rep_index,
                             n_observed=sample.n, h=h, errors=errors)


def fit_rate(errors, sizes) -> tuple[float, float]:
    """OLS slope of log(error) on log(size); returns (slope, stderr)."""
    errors = np.asarray(errors, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if len(errors) != len(sizes):
        raise RateFitError("errors and sizes must align")
    if len(sizes) < MIN_SIZES_FOR_SLOPE:
        raise RateFitError(
            f"slope fit needs at least {MIN_SIZES_FOR_SLOPE} distinct sizes, got {len(sizes)}"
        )
    if np.any(errors <= 0.0) or np.any(sizes <= 0.0):
        raise RateFitError("slope fit needs strictly positive errors and sizes")
    lx = np.log(sizes)
    ly = np.log(errors)
    lx_c = lx - lx.mean()
    sxx = float(np.sum(lx_c * lx_c))
    if sxx <= 0.0:
        raise RateFitError("sizes are not distinct enough to fit a slope")
    slope = float(np.sum(lx_c * ly) / sxx)
    resid = ly - (ly.mean() + slope * lx_c)
    dof = len(sizes) - 2
    sigma2 = float(np.sum(resid * resid) / dof) if dof > 0 else float("nan")
    stderr = math.sqrt(sigma2 / sxx) if dof > 0 else float("nan")
    return slope, stderr


_WORKER_CONFIG: ExperimentConfig | None = None


def _init_worker(config: ExperimentConfig) -> None:
    global _WORKER_CONFIG
    _WORKER_CONFIG = config


def _run_task(task: tuple[int, int]) -> ReplicationRecord:
    latent_n, rep_index = task
    return run_replication(_WORKER_CONFIG, latent_n, rep_index)


def run_experiment(config: ExperimentConfig) -> RateReport:
    """Run the full ladder and aggregate; parallel but order-independent."""
    true_mu(config.model)  # warm the oracle cache before forking work
    tasks = [(n, r) for n in config.sizes for r in range(config.replications)]
    if config.jobs > 1:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=config.jobs, mp_context=ctx,
                                 initializer=_init_worker, initargs=(config,)) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=8))
    else:
        records = [run_replication(config, n, r) for n, r in tasks]
    records.sort(key=lambda r: (r.latent_n, r.rep_index))

    aggregates: list[SizeAggregate] = []
    mean_by_metric: dict[str, list[float]] = {m: [] for m in config.metric_names()}
    nobs_by_metric: dict[str, list[float]] = {m: [] for m in config.metric_names()}
    for latent_n in config.sizes:
        good = [r for r in records if r.latent_n == latent_n and not r.skipped]
        if not good:
            continue
        nobs = statistics.fmean(r.n_observed for r in good)
        h_mean = statistics.fmean(r.h for r in good)
        for metric in config.metric_names():
            vals = [r.errors[metric] for r in good]
            mean = statistics.fmean(vals)
            se = statistics.stdev(vals) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
            aggregates.append(SizeAggregate(
                metric=metric, latent_n=latent_n, n_observed_mean=nobs, h_mean=h_mean,
                error_mean=mean, error_median=statistics.median(vals), error_se=se,
                replications_used=len(vals),
            ))
            mean_by_metric[metric].append(mean)
            nobs_by_metric[metric].append(nobs)

    slopes: list[SlopeFit] = []
    slope_message = None
    for metric in config.metric_names():
        try:
            slope, stderr = fit_rate(mean_by_metric[metric], nobs_by_metric[metric])
            slopes.append(SlopeFit(metric=metric, slope=slope, stderr=stderr))
        except RateFitError as exc:
            slope_message = str(exc)

    skipped = sum(1 for r in records if r.skipped)
    return RateReport(config=config, records=records, aggregates=aggregates,
                      slopes=slopes, skipped=skipped, slope_message=slope_message)
