"""Synthetic data: LPPL reference series, noisy benchmark series and JLS paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy import integrate

from lppl.errors import DomainError, ValidationError
from lppl.model import HazardParams, LpplParams, eval_hazard, eval_lppl, from_hazard_params
from lppl.series import PriceSeries

Seed = int | np.random.SeedSequence
Scheme = Literal["euler", "exact"]

# Var(t_nu) = nu / (nu - 2) = 2 for nu = 4.
_T4_SCALE = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class NoiseSpec:
    kind: Literal["gaussian", "student_t4"] = "gaussian"
    relative_std: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "student_t4"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if not self.relative_std > 0:
            raise ValidationError("relative_std must be positive")


@dataclass(frozen=True)
class SdeParams:
    """Jump-diffusion settings. ``sigma`` is per sqrt(day), ``dt`` in days."""

    hazard: HazardParams
    sigma: float = 0.0
    kappa: float = 0.2
    dt: float = 0.01
    p0: float = 1.0
    scheme: Scheme = "euler"

    def __post_init__(self) -> None:
        if self.scheme not in ("euler", "exact"):
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.sigma < 0:
            raise ValidationError("sigma must be nonnegative")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not 0.0 < self.kappa < 1.0:
            raise ValidationError("kappa must lie in (0, 1)")
        if not self.p0 > 0:
            raise ValidationError("p0 must be positive")


def path_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Independent, reproducible stream for member ``index`` of an ensemble."""
    return np.random.SeedSequence([int(base_seed), int(index)])


def generate_reference(params: LpplParams, n: int, t0: float = 1.0) -> PriceSeries:
    """Noise-free log-price series ``eval_lppl(params, t)`` for ``t = t0 .. t0+n-1``."""
    if n < 1:
        raise ValidationError("n must be positive")
    t = t0 + np.arange(n, dtype=float)
    if t[-1] >= params.t_c:
        raise DomainError(f"window end {t[-1]} reaches t_c={params.t_c}")
    return PriceSeries(t0, eval_lppl(params, t), "log")


def add_noise(series: PriceSeries, spec: NoiseSpec) -> PriceSeries:
    """Add i.i.d. zero-mean noise whose std is ``relative_std * max(values)``."""
    if series.scale != "log":
        raise ValidationError("noise is added to log-prices; series must be log-scale")
    rng = np.random.default_rng(spec.seed)
    n = len(series)
    if spec.kind == "gaussian":
        eps = rng.standard_normal(n)
    else:
        eps = rng.standard_t(4, n) * _T4_SCALE
    std = spec.relative_std * float(np.max(series.values))
    return series.with_values(series.values + std * eps)


def _steps_per_day(dt: float) -> int:
    k = int(round(1.0 / dt))
    if k < 1 or abs(k * dt - 1.0) > 1e-9:
        raise ValidationError(f"dt={dt} must divide one day into an integer number of steps")
    return k


def _step_hazard(sde: SdeParams, n: int, t0: float) -> tuple[np.ndarray, np.ndarray]:
    """Hazard mass of each step and the cumulative drift ``kappa int h`` at step edges.

    ``euler`` uses ``h(t) dt``; ``exact`` integrates the hazard over each step,
    which equals the increment of the matching LPPL curve divided by kappa.
    """
    k = _steps_per_day(sde.dt)
    n_steps = (n - 1) * k
    if not n_steps:
        return np.zeros(0), np.zeros(1)
    if t0 + (n - 1) >= sde.hazard.t_c:
        raise DomainError("simulation horizon reaches t_c")
    if sde.scheme == "euler":
        t_steps = t0 + sde.dt * np.arange(n_steps)
        hdt = np.asarray(eval_hazard(sde.hazard, t_steps), dtype=float) * sde.dt
        drift = np.concatenate([[0.0], np.cumsum(sde.kappa * hdt)])
    else:
        curve = from_hazard_params(replace(sde.hazard, kappa=sde.kappa))
        t_edges = t0 + sde.dt * np.arange(n_steps + 1)
        level = np.asarray(eval_lppl(curve, t_edges), dtype=float)
        hdt = np.diff(level) / sde.kappa
        drift = level - level[0]
    if np.any(hdt > 1.0):
        raise ValidationError("hazard mass per step exceeds 1; reduce dt")
    return hdt, drift


def _integrate_paths(
    sde: SdeParams, hdt: np.ndarray, drift: np.ndarray, z: np.ndarray, u: np.ndarray, crashes: bool
) -> tuple[np.ndarray, np.ndarray]:
    # z, u have shape (paths, steps); returns log-price at every step edge.
    incr = sde.sigma * math.sqrt(sde.dt) * z - 0.5 * sde.sigma**2 * sde.dt
    if crashes:
        p_jump = hdt if sde.scheme == "euler" else -np.expm1(-np.maximum(hdt, 0.0))
        jumps = u < p_jump
        incr = incr + math.log1p(-sde.kappa) * jumps
    else:
        jumps = np.zeros_like(u, dtype=bool)
    logp = np.zeros((z.shape[0], z.shape[1] + 1))
    np.cumsum(incr, axis=1, out=logp[:, 1:])
    logp += math.log(sde.p0) + drift[None, :]
    return logp, jumps


def simulate_jls(sde: SdeParams, n: int, seed: Seed, t0: float = 0.0, *, crashes: bool = True) -> PriceSeries:
    """One Euler path of the JLS jump-diffusion, sampled on ``n`` integer days.

    Log-price increments are ``(kappa h - sigma^2/2) dt + sigma sqrt(dt) Z``;
    a crash fires with probability ``h dt`` per step and multiplies the
    price by ``1 - kappa``. The path continues after a crash. With
    ``crashes=False`` the no-crash conditional dynamics are simulated.

    ``scheme="exact"`` replaces ``h dt`` by the exact hazard integral over
    each step (and the jump probability by ``1 - exp(-int h)``), so the
    sigma = 0 no-crash path lies on the LPPL curve to rounding.
    """
    logp, crash_t = simulate_jls_ensemble(sde, n, seed, 1, t0=t0, crashes=crashes, _single=seed)
    return PriceSeries(t0, logp[0], "log", crash_times=crash_t[0])


def simulate_jls_ensemble(
    sde: SdeParams,
    n: int,
    base_seed: int,
    n_paths: int,
    t0: float = 0.0,
    *,
    crashes: bool = True,
    chunk: int = 128,
    _single: Seed | None = None,
) -> tuple[np.ndarray, list[tuple[float, ...]]]:
    """Simulate ``n_paths`` paths; path ``i`` uses ``path_seed(base_seed, i)``.

    Returns log-prices of shape ``(n_paths, n)`` and each path's crash times.
    Output does not depend on ``chunk``.
    """
    if n < 1 or n_paths < 1:
        raise ValidationError("n and n_paths must be positive")
    hdt, drift = _step_hazard(sde, n, t0)
    k = _steps_per_day(sde.dt)
    n_steps = hdt.size
    out = np.empty((n_paths, n))
    crash_times: list[tuple[float, ...]] = []
    for start in range(0, n_paths, chunk):
        idx = range(start, min(start + chunk, n_paths))
        z = np.empty((len(idx), n_steps))
        u = np.empty((len(idx), n_steps))
        for row, i in enumerate(idx):
            rng = np.random.default_rng(_single if _single is not None else path_seed(base_seed, i))
            z[row] = rng.standard_normal(n_steps)
            u[row] = rng.random(n_steps)
        logp, jumps = _integrate_paths(sde, hdt, drift, z, u, crashes)
        out[start : start + len(idx)] = logp[:, ::k]
        for row in range(len(idx)):
            # a crash drawn in step j lands at the end of that step
            crash_times.append(tuple(t0 + (np.flatnonzero(jumps[row]) + 1) * sde.dt))
    return out, crash_times


def crash_probability(h: HazardParams, t1: float, t2: float) -> float:
    """Probability of at least one crash in ``[t1, t2]``: ``1 - exp(-int h dt)``.

    The integrand is singular at ``t_c`` for ``m < 1``. The power-law part is
    integrated exactly after ``u = (t_c - t)^m``; the oscillatory part is
    integrated in ``s = ln(t_c - t)``, where it becomes ``e^{ms} cos(ws - phi')``.
    """
    if not (t1 < t2 <= h.t_c):
        raise DomainError(f"need t1 < t2 <= t_c, got t1={t1}, t2={t2}, t_c={h.t_c}")
    tau1 = h.t_c - t1
    tau2 = h.t_c - t2
    if tau2 == 0.0 and h.m <= 0.0:
        raise DomainError("hazard integral diverges at t_c for m <= 0")
    m = h.m
    if m == 0.0:
        power = h.B_prime * (math.log(tau1) - math.log(tau2))
    else:
        power = h.B_prime * (tau1**m - tau2**m) / m
    osc = 0.0
    if h.C_prime != 0.0:
        s_hi = math.log(tau1)
        s_lo = math.log(tau2) if tau2 > 0 else -math.inf
        if m > 0:
            s_lo = max(s_lo, s_hi - 60.0 / m)
        f = lambda s: math.exp(m * (s - s_hi))  # noqa: E731
        cos_part, _ = integrate.quad(f, s_lo, s_hi, weight="cos", wvar=h.omega, limit=400)
        sin_part, _ = integrate.quad(f, s_lo, s_hi, weight="sin", wvar=h.omega, limit=400)
        scale = math.exp(m * s_hi)
        osc = h.C_prime * scale * (math.cos(h.phi_prime) * cos_part + math.sin(h.phi_prime) * sin_part)
    return -math.expm1(-(power + osc))
