"""Probabilistic forecast of the critical time from ensembles of fits."""

from lppl.forecast.kde import GridSpec, SampleSummary, TcDensity, kde, silverman_bandwidth, summarize_samples
from lppl.forecast.replicas import (
    ReplicaSpec,
    ar1_replicas,
    block_permute,
    bootstrap_replicas,
    estimate_ar1,
    make_replicas,
)
from lppl.forecast.scan import Forecast, ScanPlan, forecast_tc, replica_ensemble, scan_windows
from lppl.forecast.summary import summarize


def tc_density(ensemble, grid=None, method="adaptive", parameter="t_c", weights=None) -> TcDensity:
    """Density of ``parameter`` (default ``t_c``) over all fits of ``ensemble``."""
    return kde(ensemble.samples(parameter), grid, method, weights, parameter)


__all__ = [
    "Forecast",
    "GridSpec",
    "ReplicaSpec",
    "SampleSummary",
    "ScanPlan",
    "TcDensity",
    "ar1_replicas",
    "block_permute",
    "bootstrap_replicas",
    "estimate_ar1",
    "forecast_tc",
    "kde",
    "make_replicas",
    "replica_ensemble",
    "scan_windows",
    "silverman_bandwidth",
    "summarize",
    "summarize_samples",
    "tc_density",
]
