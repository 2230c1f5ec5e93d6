"""Kernel conditional quantile estimation under random left truncation.

Core pieces:

* :mod:`truncq.kernels` kernels, smoothing distributions, bandwidths
* :mod:`truncq.lynden_bell` risk set, product-limit curves, mu_n
* :mod:`truncq.estimator` conditional CDF / quantile estimation
* :mod:`truncq.datagen` dependent truncated data simulation with oracles
* :mod:`truncq.harness` Monte-Carlo convergence-rate experiments
* :mod:`truncq.service` FastAPI wrapper; :mod:`truncq.cli` thin client
"""

__version__ = "0.1.0"

from .datagen import (
    GeneratedDataset,
    TruncatedDataModel,
    generate,
    true_conditional_cdf,
    true_mu,
    true_quantile,
)
from .estimator import ConditionalCdfEstimator, QuantileQuery, fit
from .harness import (
    ExperimentConfig,
    GridSpec,
    RateReport,
    fit_rate,
    run_experiment,
    run_replication,
    theoretical_rate,
)
from .kernels import (
    BandwidthSchedule,
    KernelSpec,
    SmootherSpec,
    bandwidth,
    kernel_eval,
    smoother_density,
    smoother_eval,
)
from .lynden_bell import (
    ObservedSample,
    StepCurve,
    TruncationEstimates,
    lynden_bell_f,
    lynden_bell_g,
    risk_set,
    truncation_probability,
)

__all__ = [
    "BandwidthSchedule",
    "ConditionalCdfEstimator",
    "ExperimentConfig",
    "GeneratedDataset",
    "GridSpec",
    "KernelSpec",
    "ObservedSample",
    "QuantileQuery",
    "RateReport",
    "SmootherSpec",
    "StepCurve",
    "TruncatedDataModel",
    "TruncationEstimates",
    "bandwidth",
    "fit",
    "fit_rate",
    "generate",
    "kernel_eval",
    "lynden_bell_f",
    "lynden_bell_g",
    "risk_set",
    "run_experiment",
    "run_replication",
    "smoother_density",
    "smoother_eval",
    "theoretical_rate",
    "true_conditional_cdf",
    "true_mu",
    "true_quantile",
    "truncation_probability",
]
