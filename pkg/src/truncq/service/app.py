"""HTTP service wrapping the estimator chain.

The service holds fitted estimators in an in-memory registry so a fit can
be queried repeatedly (and by several clients) without refitting.  All
domain computation lives in the core package; handlers only marshal.
"""

from __future__ import annotations

import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..datagen import generate
from ..errors import (
    ConfigurationError,
    DegenerateSampleError,
    DegenerateWeightsError,
    GenerationError,
    NumericError,
)
from ..estimator import ConditionalCdfEstimator, estimator_from_dict, fit
from ..harness import run_experiment
from ..kernels import KernelSpec, SmootherSpec, bandwidth
from ..lynden_bell import ObservedSample, StepCurve, truncation_probability
from . import schemas


def _curve_payload(curve: StepCurve) -> schemas.CurvePayload:
    return schemas.CurvePayload(
        points=[float(v) for v in curve.points],
        values=[float(v) for v in curve.at_values],
        left_values=[float(v) for v in curve.left_values],
        boundary_left=float(curve.boundary_left),
        boundary_right=float(curve.boundary_right),
    )


def _summary(estimator_id: str, est: ConditionalCdfEstimator) -> schemas.EstimatorSummary:
    return schemas.EstimatorSummary(
        estimator_id=estimator_id,
        n=est.n,
        n_active=est.n_active,
        h=est.h,
        mu_hat=est.mu_hat,
        mu_invariance_spread=est.mu_invariance_spread,
        kernel=est.kernel.family,
        smoother=est.smoother.family,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="truncq", version=__version__)
    registry: dict[str, ConditionalCdfEstimator] = {}
    lock = threading.Lock()

    def get_estimator(estimator_id: str) -> ConditionalCdfEstimator:
        with lock:
            est = registry.get(estimator_id)
        if est is None:
            raise HTTPException(status_code=404, detail=f"unknown estimator {estimator_id!r}")
        return est

    def register(est: ConditionalCdfEstimator) -> str:
        estimator_id = uuid.uuid4().hex[:12]
        with lock:
            registry[estimator_id] = est
        return estimator_id

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/datasets/generate", response_model=schemas.GenerateResponse)
    def generate_dataset(req: schemas.GenerateRequest) -> schemas.GenerateResponse:
        try:
            dataset = generate(req.model.to_model(), req.latent_n)
        except (ConfigurationError, DegenerateSampleError, GenerationError, NumericError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        obs = dataset.observed
        return schemas.GenerateResponse(
            x=[float(v) for v in obs.x],
            y=[float(v) for v in obs.y],
            t=[float(v) for v in obs.t],
            latent_size=dataset.latent_size,
            observed_n=obs.n,
            observed_ratio=dataset.observed_ratio,
            true_mu=dataset.true_mu,
            assumption_compliant=dataset.model.assumption_compliant,
            model=req.model,
        )

    @app.post("/truncation/estimate", response_model=schemas.TruncationResponse)
    def truncation_estimate(req: schemas.TruncationRequest) -> schemas.TruncationResponse:
        try:
            sample = ObservedSample(x=np.asarray(req.x), y=np.asarray(req.y), t=np.asarray(req.t))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        trunc = truncation_probability(sample)
        return schemas.TruncationResponse(
            mu_hat=trunc.mu_hat,
            mu_invariance_spread=trunc.mu_invariance_spread,
            c_curve=_curve_payload(trunc.c_curve),
            f_curve=_curve_payload(trunc.f_curve),
            g_curve=_curve_payload(trunc.g_curve),
        )

    @app.post("/estimators", response_model=schemas.EstimatorSummary)
    def fit_estimator(req: schemas.FitRequest) -> schemas.EstimatorSummary:
        try:
            sample = ObservedSample(x=np.asarray(req.x), y=np.asarray(req.y),
                                    t=np.asarray(req.t), latent_size=req.latent_size)
            h = bandwidth(req.bandwidth.to_schedule(), sample.n,
                          sample_dispersion=float(np.std(sample.x)) or None)
            est = fit(sample, KernelSpec(req.kernel), SmootherSpec(req.smoother), h)
        except (ValueError, ConfigurationError, DegenerateWeightsError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _summary(register(est), est)

    @app.get("/estimators/{estimator_id}", response_model=schemas.EstimatorSummary)
    def estimator_summary(estimator_id: str) -> schemas.EstimatorSummary:
        return _summary(estimator_id, get_estimator(estimator_id))

    @app.delete("/estimators/{estimator_id}")
    def delete_estimator(estimator_id: str) -> dict:
        with lock:
            if registry.pop(estimator_id, None) is None:
                raise HTTPException(status_code=404, detail=f"unknown estimator {estimator_id!r}")
        return {"deleted": estimator_id}

    @app.get("/estimators/{estimator_id}/export")
    def export_estimator(estimator_id: str) -> dict:
        return get_estimator(estimator_id).to_dict()

    @app.post("/estimators/import", response_model=schemas.EstimatorSummary)
    def import_estimator(req: schemas.ImportEstimatorRequest) -> schemas.EstimatorSummary:
        try:
            est = estimator_from_dict(req.document)
        except (ValueError, ConfigurationError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _summary(register(est), est)

    @app.get("/estimators/{estimator_id}/curves", response_model=schemas.TruncationResponse)
    def estimator_curves(estimator_id: str) -> schemas.TruncationResponse:
        est = get_estimator(estimator_id)
        trunc = truncation_probability(est.sample)
        return schemas.TruncationResponse(
            mu_hat=trunc.mu_hat,
            mu_invariance_spread=trunc.mu_invariance_spread,
            c_curve=_curve_payload(trunc.c_curve),
            f_curve=_curve_payload(trunc.f_curve),
            g_curve=_curve_payload(trunc.g_curve),
        )

    @app.post("/estimators/{estimator_id}/cdf", response_model=schemas.CdfResponse)
    def conditional_cdf(estimator_id: str, req: schemas.CdfRequest) -> schemas.CdfResponse:
        est = get_estimator(estimator_id)
        results = []
        for q in req.queries:
            no_data = not est.has_local_data(q.x)
            results.append(schemas.CdfValue(
                x=q.x, y=q.y, value=est.conditional_cdf(q.x, q.y), no_data=no_data,
            ))
        return schemas.CdfResponse(results=results)

    def _quantile_rows(est: ConditionalCdfEstimator, points: list[tuple[float, float]],
                       interval: tuple[float, float], tolerance: float | None):
        rows = []
        for x, p in points:
            values, status, _ = est.quantile_grid(np.array([x]), p, interval, tolerance)
            if status[0] == 0:
                q_val = float(values[0])
                rows.append((x, p, q_val, est.conditional_cdf(x, q_val), "ok"))
            elif status[0] == 1:
                rows.append((x, p, None, None, "no_local_data"))
            else:
                rows.append((x, p, None, None, "not_bracketed"))
        return rows

    @app.post("/estimators/{estimator_id}/quantile", response_model=schemas.QuantileResponse)
    def conditional_quantile(estimator_id: str, req: schemas.QuantileRequest) -> schemas.QuantileResponse:
        est = get_estimator(estimator_id)
        interval = req.search_interval or est.default_search_interval()
        if not interval[0] < interval[1]:
            raise HTTPException(status_code=400, detail="search interval must satisfy a < b")
        rows = [
            schemas.QuantileRow(x=x, p=p, q=q, cdf_at_q=c, status=s)
            for x, p, q, c, s in _quantile_rows(
                est, [(q.x, q.p) for q in req.queries], interval, req.tolerance)
        ]
        return schemas.QuantileResponse(rows=rows, search_interval=interval)

    @app.post("/estimators/{estimator_id}/predict", response_model=schemas.PredictResponse)
    def predict_median(estimator_id: str, req: schemas.PredictRequest) -> schemas.PredictResponse:
        est = get_estimator(estimator_id)
        interval = req.search_interval or est.default_search_interval()
        if not interval[0] < interval[1]:
            raise HTTPException(status_code=400, detail="search interval must satisfy a < b")
        rows = [
            schemas.PredictRow(x=x, y_hat=q, status=s)
            for x, _, q, _, s in _quantile_rows(
                est, [(x, 0.5) for x in req.x], interval, req.tolerance)
        ]
        return schemas.PredictResponse(rows=rows, search_interval=interval)

    @app.post("/estimators/{estimator_id}/density", response_model=schemas.DensityResponse)
    def densities(estimator_id: str, req: schemas.DensityRequest) -> schemas.DensityResponse:
        est = get_estimator(estimator_id)
        rows = [
            schemas.DensityRow(x=x, observed=est.density_observed(x),
                               marginal=est.density_marginal(x))
            for x in req.x
        ]
        return schemas.DensityResponse(rows=rows)

    @app.post("/experiments/rate", response_model=schemas.RateResponse)
    def rate_experiment(req: schemas.RateRequest) -> schemas.RateResponse:
        try:
            config = req.to_config()
        except (ValueError, ConfigurationError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            report = run_experiment(config)
        except (NumericError, ConfigurationError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return schemas.RateResponse(
            tidy=[schemas.TidyRow(**row) for row in report.tidy_rows()],
            summary=[schemas.SummaryRow(**row) for row in report.summary_rows()],
            slopes=[schemas.SlopeRow(metric=s.metric, slope=s.slope, stderr=s.stderr)
                    for s in report.slopes],
            skipped=report.skipped,
            slope_message=report.slope_message,
        )

    return app
