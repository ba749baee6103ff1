"""Replica series built from a calibrated fit plus resampled or modelled residuals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import signal

from lppl.calibrate.fit import FitResult
from lppl.errors import ValidationError
from lppl.model import eval_lppl
from lppl.series import PriceSeries
from lppl.simulate import path_seed

_AR1_BURN_IN = 200


@dataclass(frozen=True)
class ReplicaSpec:
    """``block_len`` may be a tuple; replica ``i`` then uses ``block_len[i % len]``."""

    method: Literal["block_bootstrap", "ar1"] = "block_bootstrap"
    count: int = 20
    block_len: int | tuple[int, ...] = 25
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in ("block_bootstrap", "ar1"):
            raise ValidationError(f"unknown replica method {self.method!r}")
        if self.count < 1:
            raise ValidationError("replica count must be >= 1")
        lens = self.block_lens
        if not lens or any(b < 1 for b in lens):
            raise ValidationError("block_len must be >= 1")

    @property
    def block_lens(self) -> tuple[int, ...]:
        b = self.block_len
        return tuple(int(x) for x in b) if isinstance(b, (tuple, list)) else (int(b),)

    def to_dict(self) -> dict:
        b = self.block_len
        return {
            "method": self.method,
            "count": self.count,
            "block_len": list(b) if isinstance(b, (tuple, list)) else int(b),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ReplicaSpec:
        d = dict(d)
        if isinstance(d.get("block_len"), list):
            d["block_len"] = tuple(d["block_len"])
        return cls(**d)


def _check_aligned(series: PriceSeries, fit: FitResult) -> None:
    if len(series) != fit.residuals.size or (series.t1, series.t2) != fit.provenance.window:
        raise ValidationError("fit residuals are not aligned with the series window")


def _compose(series: PriceSeries, fit: FitResult, residuals: np.ndarray) -> PriceSeries:
    """Fitted curve plus ``residuals``, in the residual convention of the fit's objective."""
    f = np.asarray(eval_lppl(fit.params, series.t))
    if fit.provenance.objective == "normalized_price_rmse":
        # r = (p - e^f) / p  =>  ln p = f - ln(1 - r)
        logv = f - np.log1p(-residuals)
    else:
        logv = f + residuals
    values = logv if series.scale == "log" else np.exp(logv)
    return series.with_values(values)


def block_permute(residuals: np.ndarray, block_len: int, rng: np.random.Generator) -> np.ndarray:
    """Cut into consecutive blocks (last one may be short) and permute them."""
    r = np.asarray(residuals, dtype=float)
    if block_len > r.size:
        raise ValidationError(f"block_len {block_len} exceeds window length {r.size}")
    blocks = [r[i : i + block_len] for i in range(0, r.size, block_len)]
    order = rng.permutation(len(blocks))
    return np.concatenate([blocks[i] for i in order])


def bootstrap_replicas(series: PriceSeries, fit: FitResult, spec: ReplicaSpec) -> list[PriceSeries]:
    """Block-bootstrap replicas; no distributional assumption on the residuals."""
    _check_aligned(series, fit)
    lens = spec.block_lens
    if max(lens) > len(series):
        raise ValidationError(f"block_len {max(lens)} exceeds window length {len(series)}")
    out = []
    for i in range(spec.count):
        rng = np.random.default_rng(path_seed(spec.seed, i))
        out.append(_compose(series, fit, block_permute(fit.residuals, lens[i % len(lens)], rng)))
    return out


def estimate_ar1(residuals: np.ndarray) -> tuple[float, float]:
    """Least-squares ``rho`` of ``r_t`` on ``r_{t-1}`` (no intercept) and innovation std."""
    r = np.asarray(residuals, dtype=float)
    if r.size < 3:
        raise ValidationError("need at least 3 residuals for an AR(1) fit")
    x, y = r[:-1], r[1:]
    denom = float(x @ x)
    rho = float(x @ y) / denom if denom > 0 else 0.0
    e = y - rho * x
    return rho, math.sqrt(float(e @ e) / e.size)


def ar1_noise(rho: float, sigma: float, n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(n + _AR1_BURN_IN) * sigma
    return signal.lfilter([1.0], [1.0, -rho], z)[_AR1_BURN_IN:]


def ar1_replicas(series: PriceSeries, fit: FitResult, spec: ReplicaSpec) -> list[PriceSeries]:
    """Replicas with stationary AR(1) noise calibrated on the fit residuals."""
    _check_aligned(series, fit)
    rho, sigma = estimate_ar1(fit.residuals)
    if abs(rho) >= 1.0:
        raise ValidationError(f"residual AR(1) coefficient {rho:.4f} is non-stationary")
    out = []
    for i in range(spec.count):
        rng = np.random.default_rng(path_seed(spec.seed, i))
        out.append(_compose(series, fit, ar1_noise(rho, sigma, len(series), rng)))
    return out


def make_replicas(series: PriceSeries, fit: FitResult, spec: ReplicaSpec) -> list[PriceSeries]:
    if spec.method == "block_bootstrap":
        return bootstrap_replicas(series, fit, spec)
    return ar1_replicas(series, fit, spec)
