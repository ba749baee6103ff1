"""Adaptive Gaussian kernel density estimation on a grid.

Two-stage estimator: a fixed-bandwidth pilot (Silverman's rule) is
evaluated at the samples, then sample ``i`` receives the local bandwidth
``h0 * (pilot_i / g) ** -0.5`` where ``g`` is the geometric mean of the
pilot values (Abramson's square-root law).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from lppl.errors import ValidationError

Method = Literal["adaptive", "silverman"]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_DIRECT_PILOT_MAX = 4000
_PILOT_GRID = 8192
_CHUNK = 2048


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid: ``n`` points over ``[lo, hi]``; missing ends are set to
    the sample range padded by ``pad`` times the largest bandwidth."""

    n: int = 1024
    lo: float | None = None
    hi: float | None = None
    pad: float = 4.0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValidationError("grid needs at least 2 points")


@dataclass(frozen=True)
class SampleSummary:
    mean: float
    std: float
    median: float
    q05: float
    q95: float
    n: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "median": self.median, "q05": self.q05, "q95": self.q95, "n": self.n}


@dataclass(frozen=True, eq=False)
class TcDensity:
    """Gridded density of one parameter (``t_c`` unless stated otherwise)."""

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    summary: SampleSummary
    method: str = "adaptive"
    parameter: str = "t_c"
    degenerate: bool = False
    local_bandwidths: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_samples(self) -> int:
        return self.summary.n

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def moments(self) -> tuple[float, float]:
        """Mean and standard deviation of the gridded density."""
        mean = float(np.trapezoid(self.grid * self.density, self.grid))
        var = float(np.trapezoid((self.grid - mean) ** 2 * self.density, self.grid))
        return mean, math.sqrt(max(var, 0.0))

    def quantile(self, q: float) -> float:
        """Quantile of the gridded density (trapezoid CDF, linear interpolation)."""
        if not 0.0 <= q <= 1.0:
            raise ValidationError("q must lie in [0, 1]")
        steps = 0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.grid)
        cdf = np.concatenate([[0.0], np.cumsum(steps)])
        cdf /= cdf[-1]
        return float(np.interp(q, cdf, self.grid))

    def interval(self, level: float = 0.9) -> tuple[float, float]:
        """Central ``level`` interval of the gridded density."""
        a = 0.5 * (1.0 - level)
        return self.quantile(a), self.quantile(1.0 - a)


def weighted_quantile(x: np.ndarray, q: float, weights: np.ndarray | None = None) -> float:
    """Quantile of the empirical CDF, averaging where the CDF is flat at ``q``.

    Depends on the sample only through its empirical distribution, so it is
    unchanged when the sample is duplicated.
    """
    x = np.asarray(x, dtype=float)
    if weights is None:
        return float(np.quantile(x, q, method="averaged_inverted_cdf"))
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cw = np.cumsum(np.asarray(weights, dtype=float)[order])
    cw /= cw[-1]
    # tolerance: cumulative sums of equal weights miss exact plateaus by rounding
    i = int(np.searchsorted(cw, q - 1e-12, side="left"))
    i = min(i, xs.size - 1)
    if abs(cw[i] - q) <= 1e-12 and i + 1 < xs.size:
        return float(0.5 * (xs[i] + xs[i + 1]))
    return float(xs[i])


def summarize_samples(x: np.ndarray, weights: np.ndarray | None = None) -> SampleSummary:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValidationError("cannot summarize an empty sample")
    w = None if weights is None else np.asarray(weights, dtype=float)
    mean = float(np.average(x, weights=w))
    std = math.sqrt(float(np.average((x - mean) ** 2, weights=w)))
    return SampleSummary(
        mean=mean,
        std=std,
        median=weighted_quantile(x, 0.5, w),
        q05=weighted_quantile(x, 0.05, w),
        q95=weighted_quantile(x, 0.95, w),
        n=int(x.size),
    )


def silverman_bandwidth(x: np.ndarray, weights: np.ndarray | None = None) -> float:
    x = np.asarray(x, dtype=float)
    n = x.size
    s = summarize_samples(x, weights).std
    iqr = weighted_quantile(x, 0.75, weights) - weighted_quantile(x, 0.25, weights)
    spread = min(s, iqr / 1.34) if iqr > 0 else s
    return 0.9 * spread * n ** (-0.2)


def _gauss_mix(points: np.ndarray, centers: np.ndarray, h: np.ndarray, w: np.ndarray) -> np.ndarray:
    # sum_i w_i N(points; centers_i, h_i^2), chunked over centers
    out = np.zeros(points.size)
    for s in range(0, centers.size, _CHUNK):
        c = centers[s : s + _CHUNK]
        hh = h[s : s + _CHUNK]
        z = (points[:, None] - c[None, :]) / hh[None, :]
        out += np.exp(-0.5 * z * z) @ (w[s : s + _CHUNK] / (hh * _SQRT_2PI))
    return out


def _pilot_at_samples(x: np.ndarray, h0: float, w: np.ndarray) -> np.ndarray:
    hs = np.full(x.size, h0)
    if x.size <= _DIRECT_PILOT_MAX:
        return _gauss_mix(x, x, hs, w)
    g = np.linspace(x.min() - 4 * h0, x.max() + 4 * h0, _PILOT_GRID)
    return np.interp(x, g, _gauss_mix(g, x, hs, w))


def kde(
    samples: np.ndarray,
    grid: GridSpec | np.ndarray | None = None,
    method: Method = "adaptive",
    weights: np.ndarray | None = None,
    parameter: str = "t_c",
) -> TcDensity:
    """Kernel density of ``samples`` normalised to unit trapezoidal mass on the grid."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ValidationError("density needs a nonempty, finite sample")
    if method not in ("adaptive", "silverman"):
        raise ValidationError(f"unknown KDE method {method!r}")
    w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != x.shape or np.any(w < 0) or not w.sum() > 0:
        raise ValidationError("weights must be nonnegative, one per sample, not all zero")
    w = w / w.sum()
    summary = summarize_samples(x, None if weights is None else w)

    h0 = silverman_bandwidth(x, None if weights is None else w)
    # a spread at rounding level of the location is no spread at all
    degenerate = x.size < 2 or not h0 > 1e-9 * max(abs(summary.mean), 1.0)
    if degenerate:
        # spike of width ~1e-3 of the location scale: keeps the grid finite
        h0 = 1e-3 * max(abs(summary.mean), 1.0)
        local = np.full(x.size, h0)
    elif method == "adaptive":
        pilot = _pilot_at_samples(x, h0, w)
        pilot = np.maximum(pilot, np.finfo(float).tiny)
        log_g = float(np.sum(w * np.log(pilot)))
        local = h0 * np.exp(-0.5 * (np.log(pilot) - log_g))
    else:
        local = np.full(x.size, h0)

    if isinstance(grid, np.ndarray):
        g = np.asarray(grid, dtype=float)
    else:
        spec = grid or GridSpec()
        pad = spec.pad * float(local.max())
        lo = spec.lo if spec.lo is not None else float(x.min()) - pad
        hi = spec.hi if spec.hi is not None else float(x.max()) + pad
        g = np.linspace(lo, hi, spec.n)
    if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
        raise ValidationError("grid must be strictly increasing with at least 2 points")
    dens = _gauss_mix(g, x, local, w)
    mass = float(np.trapezoid(dens, g))
    if not mass > 0:
        raise ValidationError("grid carries no probability mass; widen it")
    return TcDensity(
        grid=g,
        density=dens / mass,
        bandwidth=float(h0),
        summary=summary,
        method=method,
        parameter=parameter,
        degenerate=degenerate,
        local_bandwidths=local,
    )
