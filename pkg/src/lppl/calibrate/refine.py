"""Bounded Levenberg-Marquardt on the slaved residuals.

The residual vector at a nonlinear point is the one left after exact
elimination of the linear parameters (variable projection), so LM only
moves ``(t_c, m, omega[, phi])``. The Jacobian is taken by central
differences. Steps that would leave the bounds are shortened to stay
inside; coordinates sitting on a bound with the gradient pushing outward are
frozen for that iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lppl.calibrate.config import FitConfig
from lppl.calibrate.slaving import Slaved, n_nonlinear, slave_linear
from lppl.model import TWO_PI, FitBounds
from lppl.series import PriceSeries

_FD_REL = 1e-6
# residuals this small relative to the data are rounding noise
_ROUNDOFF = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class RefineOutcome:
    theta: tuple[float, ...]
    slaved: Slaved
    start_sse: float
    iterations: int
    status: str


def _limits(bounds: FitBounds, dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ranges = [bounds.tc, bounds.m, bounds.omega, bounds.phi][:dim]
    lo = np.array([r[0] for r in ranges], dtype=float)
    hi = np.array([r[1] for r in ranges], dtype=float)
    periodic = np.zeros(dim, dtype=bool)
    if dim == 4:
        periodic[3] = True
        lo[3], hi[3] = -np.inf, np.inf
    return lo, hi, periodic


def _jacobian(resid, theta: np.ndarray, r0: np.ndarray) -> np.ndarray | None:
    J = np.empty((r0.size, theta.size))
    for i in range(theta.size):
        h = _FD_REL * max(abs(theta[i]), 1.0)
        e = np.zeros_like(theta)
        e[i] = h
        rp = resid(theta + e)
        rm = resid(theta - e)
        if rp is not None and rm is not None:
            J[:, i] = (rp - rm) / (2 * h)
        elif rp is not None:
            J[:, i] = (rp - r0) / h
        elif rm is not None:
            J[:, i] = (r0 - rm) / h
        else:
            return None
    return J


def _max_step_fraction(theta: np.ndarray, step: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    alpha = 1.0
    for x, d, a, b in zip(theta, step, lo, hi):
        if d > 0 and np.isfinite(b):
            alpha = min(alpha, (b - x) / d)
        elif d < 0 and np.isfinite(a):
            alpha = min(alpha, (a - x) / d)
    return max(alpha, 0.0)


def lm_refine(start: tuple[float, ...] | np.ndarray, series: PriceSeries, config: FitConfig) -> RefineOutcome:
    """Refine ``start`` by Levenberg-Marquardt; never returns a worse point."""
    bounds = config.resolve_bounds(series)
    dim = n_nonlinear(config.slaving)
    lo, hi, periodic = _limits(bounds, dim)
    tol = config.refine

    def solve(theta: np.ndarray) -> Slaved:
        return slave_linear(theta, series, config.slaving, config.objective)

    def resid(theta: np.ndarray) -> np.ndarray | None:
        return solve(theta).residuals

    theta = np.asarray(start, dtype=float).copy()
    if np.any(theta[~periodic] < lo[~periodic]) or np.any(theta[~periodic] > hi[~periodic]):
        raise ValueError(f"start point {tuple(theta)} outside bounds")
    cur = solve(theta)
    start_sse = cur.sse
    if cur.degenerate:
        return RefineOutcome(tuple(theta), cur, start_sse, 0, "degenerate")

    y_scale = float(np.max(np.abs(series.log_values())))
    floor = (_ROUNDOFF * max(y_scale, 1.0)) ** 2 * len(series)
    lam = None
    nu = 2.0
    status = "max-iter"
    it = 0
    while it < tol.max_iter:
        r = cur.residuals
        sse = cur.sse
        if sse <= floor:
            status = "converged"
            break
        J = _jacobian(resid, theta, r)
        if J is None:
            status = "degenerate-jacobian"
            break
        g = J.T @ r
        col_norm = np.linalg.norm(J, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cosines = np.where(col_norm > 0, np.abs(g) / (col_norm * math.sqrt(sse)), 0.0)
        free = np.ones(dim, dtype=bool)
        free &= ~((theta <= lo) & (g > 0))
        free &= ~((theta >= hi) & (g < 0))
        if not np.any(free) or np.max(cosines[free]) <= tol.gtol:
            status = "converged"
            break
        JtJ = J.T @ J
        diag = np.maximum(np.diag(JtJ), 1e-300)
        if lam is None:
            lam = 1e-3 * float(np.max(diag))
        it += 1
        accepted = False
        while True:
            A = JtJ[np.ix_(free, free)] + lam * np.diag(diag[free])
            try:
                d_free = np.linalg.solve(A, -g[free])
            except np.linalg.LinAlgError:
                lam *= nu
                nu *= 2.0
                if lam > 1e300:
                    break
                continue
            step = np.zeros(dim)
            step[free] = d_free
            alpha = _max_step_fraction(theta, step, lo, hi)
            if alpha < 1.0:
                step *= alpha
            trial = theta + step
            trial = np.where(periodic, np.mod(trial, TWO_PI), trial)
            trial = np.clip(trial, lo, hi)
            new = solve(trial)
            predicted = -(2 * step @ g + step @ JtJ @ step)
            actual = sse - new.sse
            if not new.degenerate and actual > 0:
                rho = actual / predicted if predicted > 0 else 0.0
                lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                small_step = np.linalg.norm(np.sqrt(diag) * step) <= tol.xtol * (
                    np.linalg.norm(np.sqrt(diag) * theta) + tol.xtol
                )
                small_gain = actual <= tol.ftol * sse
                theta, cur = trial, new
                accepted = True
                if small_step or small_gain:
                    status = "converged"
                break
            lam *= nu
            nu *= 2.0
            if lam > 1e16 * float(np.max(diag)):
                break
        if not accepted:
            status = "converged"
            break
        if status == "converged":
            break
    return RefineOutcome(tuple(float(x) for x in theta), cur, start_sse, it, status)
