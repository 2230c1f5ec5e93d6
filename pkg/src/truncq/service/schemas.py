"""Request and response models for the HTTP service.

These models are the wire contract: the CLI builds requests from config
files through the same classes, so unknown keys are rejected everywhere.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..datagen import TruncatedDataModel
from ..harness import ExperimentConfig, GridSpec
from ..kernels import BandwidthSchedule, KernelSpec, SmootherSpec


class StrictModel(BaseModel):
    # extra="forbid": unknown keys in configs and requests are hard errors
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class ModelSpec(StrictModel):
    """Generative model parameters, mirrored from the core dataclass."""

    regression: str = "three_plus_sin"
    noise: Literal["uniform", "gaussian"] = "uniform"
    noise_scale: float = Field(default=1.0, gt=0)
    ar_coefficient: float = Field(default=0.5, ge=0, lt=1)
    truncation: Literal["uniform", "none"] = "uniform"
    truncation_scale: float = Field(default=4.0, gt=0)
    seed: int = 0

    def to_model(self) -> TruncatedDataModel:
        return TruncatedDataModel(**self.model_dump())


class BandwidthSpec(StrictModel):
    rule: Literal["explicit", "power_law", "rule_of_thumb"] = "power_law"
    c: float = Field(default=1.0, gt=0)
    exponent: float = Field(default=0.2, gt=0, lt=1)

    def to_schedule(self) -> BandwidthSchedule:
        return BandwidthSchedule(rule=self.rule, c=self.c, exponent=self.exponent)


class GridRange(StrictModel):
    lo: float
    hi: float
    count: int = Field(default=41, ge=1)

    def to_grid(self) -> GridSpec:
        return GridSpec(lo=self.lo, hi=self.hi, count=self.count)


class HealthResponse(StrictModel):
    status: str
    version: str


class GenerateRequest(StrictModel):
    model: ModelSpec = ModelSpec()
    latent_n: int = Field(ge=10)


class GenerateResponse(StrictModel):
    x: list[float]
    y: list[float]
    t: list[float]
    latent_size: int
    observed_n: int
    observed_ratio: float
    true_mu: float
    assumption_compliant: bool
    model: ModelSpec


class FitRequest(StrictModel):
    x: list[float]
    y: list[float]
    t: list[float]
    latent_size: Optional[int] = None
    kernel: Literal["epanechnikov", "biweight", "gaussian"] = "epanechnikov"
    smoother: Literal["integrated_biweight", "integrated_triweight"] = "integrated_biweight"
    bandwidth: BandwidthSpec = BandwidthSpec()


class EstimatorSummary(StrictModel):
    estimator_id: str
    n: int
    n_active: int
    h: float
    mu_hat: float
    mu_invariance_spread: float
    kernel: str
    smoother: str


class CdfQuery(StrictModel):
    x: float
    y: float


class CdfRequest(StrictModel):
    queries: list[CdfQuery]


class CdfValue(StrictModel):
    x: float
    y: float
    value: float
    no_data: bool


class CdfResponse(StrictModel):
    results: list[CdfValue]


class QuantilePoint(StrictModel):
    x: float
    p: float = Field(gt=0, lt=1)


class QuantileRequest(StrictModel):
    queries: list[QuantilePoint]
    search_interval: Optional[tuple[float, float]] = None
    tolerance: Optional[float] = Field(default=None, gt=0)


QueryStatus = Literal["ok", "no_local_data", "not_bracketed"]


class QuantileRow(StrictModel):
    x: float
    p: float
    q: Optional[float]
    cdf_at_q: Optional[float]
    status: QueryStatus


class QuantileResponse(StrictModel):
    rows: list[QuantileRow]
    search_interval: tuple[float, float]


class PredictRequest(StrictModel):
    x: list[float]
    search_interval: Optional[tuple[float, float]] = None
    tolerance: Optional[float] = Field(default=None, gt=0)


class PredictRow(StrictModel):
    x: float
    y_hat: Optional[float]
    status: QueryStatus


class PredictResponse(StrictModel):
    rows: list[PredictRow]
    search_interval: tuple[float, float]


class DensityRequest(StrictModel):
    x: list[float]


class DensityRow(StrictModel):
    x: float
    observed: float
    marginal: float


class DensityResponse(StrictModel):
    rows: list[DensityRow]


class CurvePayload(StrictModel):
    points: list[float]
    values: list[float]
    left_values: list[float]
    boundary_left: float
    boundary_right: float


class TruncationRequest(StrictModel):
    x: list[float]
    y: list[float]
    t: list[float]


class TruncationResponse(StrictModel):
    mu_hat: float
    mu_invariance_spread: float
    c_curve: CurvePayload
    f_curve: CurvePayload
    g_curve: CurvePayload


class ImportEstimatorRequest(StrictModel):
    document: dict


class RateRequest(StrictModel):
    model: ModelSpec = ModelSpec()
    sizes: list[int] = [500, 1000, 2000, 4000, 8000]
    replications: int = Field(default=200, ge=1)
    bandwidth: BandwidthSpec = BandwidthSpec()
    kernel: Literal["epanechnikov", "biweight", "gaussian"] = "epanechnikov"
    smoother: Literal["integrated_biweight", "integrated_triweight"] = "integrated_biweight"
    p_levels: list[float] = [0.5]
    x_grid: GridRange = GridRange(lo=-1.0, hi=1.0, count=41)
    y_grid: GridRange = GridRange(lo=1.5, hi=4.5, count=41)
    quantile_tolerance: Optional[float] = Field(default=None, gt=0)
    base_seed: int = 0
    jobs: int = Field(default=1, ge=1)

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            model=self.model.to_model(),
            sizes=tuple(self.sizes),
            replications=self.replications,
            bandwidth=self.bandwidth.to_schedule(),
            kernel=KernelSpec(self.kernel),
            smoother=SmootherSpec(self.smoother),
            p_levels=tuple(self.p_levels),
            x_grid=self.x_grid.to_grid(),
            y_grid=self.y_grid.to_grid(),
            quantile_tolerance=self.quantile_tolerance,
            base_seed=self.base_seed,
            jobs=self.jobs,
        )


class TidyRow(StrictModel):
    latent_n: int
    rep_index: int
    n_observed: int
    metric: str
    value: Optional[float]
    skipped: bool
    skip_reason: str


class SummaryRow(StrictModel):
    metric: str
    latent_n: int
    n_observed_mean: float
    h_mean: float
    error_mean: float
    error_median: float
    error_se: float
    replications_used: int
    theoretical_rate: float
    slope: Optional[float]
    slope_stderr: Optional[float]


class SlopeRow(StrictModel):
    metric: str
    slope: float
    stderr: float


class RateResponse(StrictModel):
    tidy: list[TidyRow]
    summary: list[SummaryRow]
    slopes: list[SlopeRow]
    skipped: int
    slope_message: Optional[str]
