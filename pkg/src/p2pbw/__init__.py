"""Synthesis, analysis and estimation of P2P bandwidth traces.

Bandwidth is modelled as ``|B_i (S_{i+1} - S_i)|`` where ``B`` is power-law
traffic and ``S`` a zero-mean Ornstein-Uhlenbeck peer process.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.0.0"

from .estimation import (
    EstimationResult,
    Method,
    OUEstimator,
    PowerLawIndexEstimator,
    ar1_oracle,
    estimate_all,
    estimate_gamma_sigma,
    estimate_paper_literal,
    estimate_powerlaw_index,
    ou_log_likelihood,
)
from .exceptions import (
    ConfigError,
    DataError,
    DivergentEstimate,
    EstimationDegenerate,
    FitFailed,
    InsufficientData,
    InvalidArgument,
    P2PBandwidthError,
    UnstableQueue,
)
from .ou import Grid, OuParams, Trace, ou_exact_step, ou_generate_path, ou_stationary_autocovariance, ou_stationary_moments
from .queueing import LindleyQueue, QueueParams, TailReport, norros_tail, simulate_queue, tail_report
from .statistics import (
    AcvModelFit,
    AcvModelRegressor,
    AutocovarianceTransformer,
    LrdDiagnostic,
    MomentReport,
    fit_acv_model,
    hurst_from_indices,
    lrd_diagnostic,
    sample_autocovariance,
    sample_moments,
)
from .synthesis import (
    AggregateSpec,
    BandwidthSpec,
    MultiserviceSpec,
    synthesize_aggregate,
    synthesize_bandwidth,
    synthesize_multiservice,
    synthesize_with_factors,
)
from .traffic import PowerLawParams, TrafficIndices, generate_traffic_series, power_law_moments, power_law_sample

__all__ = [
    "__version__",
    "EstimationResult",
    "Method",
    "OUEstimator",
    "PowerLawIndexEstimator",
    "ar1_oracle",
    "estimate_all",
    "estimate_gamma_sigma",
    "estimate_paper_literal",
    "estimate_powerlaw_index",
    "ou_log_likelihood",
    "ConfigError",
    "DataError",
    "DivergentEstimate",
    "EstimationDegenerate",
    "FitFailed",
    "InsufficientData",
    "InvalidArgument",
    "P2PBandwidthError",
    "UnstableQueue",
    "Grid",
    "OuParams",
    "Trace",
    "ou_exact_step",
    "ou_generate_path",
    "ou_stationary_autocovariance",
    "ou_stationary_moments",
    "LindleyQueue",
    "QueueParams",
    "TailReport",
    "norros_tail",
    "simulate_queue",
    "tail_report",
    "AcvModelFit",
    "AcvModelRegressor",
    "AutocovarianceTransformer",
    "LrdDiagnostic",
    "MomentReport",
    "fit_acv_model",
    "hurst_from_indices",
    "lrd_diagnostic",
    "sample_autocovariance",
    "sample_moments",
    "AggregateSpec",
    "BandwidthSpec",
    "MultiserviceSpec",
    "synthesize_aggregate",
    "synthesize_bandwidth",
    "synthesize_multiservice",
    "synthesize_with_factors",
    "PowerLawParams",
    "TrafficIndices",
    "generate_traffic_series",
    "power_law_moments",
    "power_law_sample",
]
