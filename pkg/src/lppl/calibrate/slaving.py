"""Elimination of the linear LPPL parameters and the slaved objective.

For fixed nonlinear parameters the LPPL is linear in ``(A, B, C)`` (phase
fixed) or in ``(A, B, C1, C2)`` with ``C cos(w ln tau - phi) = C1 cos(w ln
tau) + C2 sin(w ln tau)``. Solving that least-squares problem exactly
leaves a 4- or 3-dimensional nonlinear search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lppl.calibrate.config import FitConfig, Objective, Slaving
from lppl.model import TWO_PI, LpplParams
from lppl.series import PriceSeries

_RCOND = 1e-12
_GN_STEPS = 8


@dataclass(frozen=True)
class Slaved:
    """Outcome of slaving at one nonlinear point.

    ``degenerate`` marks a rank-deficient design or a window touching
    ``t_c``; then ``params`` is None and ``sse`` is ``inf``.
    """

    params: LpplParams | None
    sse: float
    residuals: np.ndarray | None
    degenerate: bool = False

    @property
    def rmse(self) -> float:
        if self.residuals is None:
            return math.inf
        return math.sqrt(self.sse / self.residuals.size)


_DEGENERATE = Slaved(None, math.inf, None, True)


def n_nonlinear(mode: Slaving) -> int:
    return 3 if mode == "four_linear" else 4


def design_matrix(theta: np.ndarray, t: np.ndarray, mode: Slaving) -> np.ndarray | None:
    """Regressor columns for nonlinear point ``theta``; None if ``t_c`` is inside the window."""
    t_c, m, omega = theta[0], theta[1], theta[2]
    tau = t_c - t
    if not np.all(tau > 0):
        return None
    log_tau = np.log(tau)
    f = np.exp(m * log_tau)
    if mode == "four_linear":
        return np.column_stack([np.ones_like(f), f, f * np.cos(omega * log_tau), f * np.sin(omega * log_tau)])
    phi = theta[3]
    return np.column_stack([np.ones_like(f), f, f * np.cos(omega * log_tau - phi)])


def _to_params(theta: np.ndarray, coef: np.ndarray, mode: Slaving) -> LpplParams:
    if mode == "four_linear":
        A, B, c1, c2 = coef
        C = math.hypot(c1, c2)
        phi = math.atan2(c2, c1) % TWO_PI if C > 0 else 0.0
    else:
        A, B, C = coef
        phi = float(theta[3]) % TWO_PI
    return LpplParams(float(theta[0]), float(theta[1]), float(theta[2]), float(phi), float(A), float(B), float(C))


def _normalized_residuals(X: np.ndarray, coef: np.ndarray, y: np.ndarray) -> np.ndarray:
    # (p - e^f) / p with y = ln p
    return -np.expm1(X @ coef - y)


def _gauss_newton_normalized(X: np.ndarray, coef: np.ndarray, y: np.ndarray) -> np.ndarray:
    r = _normalized_residuals(X, coef, y)
    sse = float(r @ r)
    for _ in range(_GN_STEPS):
        J = -np.exp(X @ coef - y)[:, None] * X
        step = np.linalg.lstsq(J, -r, rcond=_RCOND)[0]
        trial = coef + step
        r_trial = _normalized_residuals(X, trial, y)
        sse_trial = float(r_trial @ r_trial)
        if not sse_trial < sse:
            break
        coef, r, sse = trial, r_trial, sse_trial
        if np.max(np.abs(step)) <= 1e-14 * (1.0 + np.max(np.abs(coef))):
            break
    return coef


def slave_linear(
    theta: np.ndarray | tuple[float, ...],
    series: PriceSeries,
    mode: Slaving = "four_linear",
    objective: Objective = "log_rmse",
) -> Slaved:
    """Exact least-squares linear parameters for fixed nonlinear ``theta``.

    ``theta`` is ``(t_c, m, omega)`` for ``four_linear`` and
    ``(t_c, m, omega, phi)`` for ``three_linear``. Under
    ``normalized_price_rmse`` the log-space solution is polished by
    Gauss-Newton on the relative price residuals.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.size != n_nonlinear(mode) or not np.all(np.isfinite(theta)):
        return _DEGENERATE
    X = design_matrix(theta, series.t, mode)
    if X is None or not np.all(np.isfinite(X)):
        return _DEGENERATE
    y = series.log_values()
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=_RCOND)
    if rank < X.shape[1]:
        return _DEGENERATE
    if objective == "log_rmse":
        r = y - X @ coef
    else:
        coef = _gauss_newton_normalized(X, coef, y)
        r = _normalized_residuals(X, coef, y)
    return Slaved(_to_params(theta, coef, mode), float(r @ r), r)


def objective(theta: np.ndarray | tuple[float, ...], series: PriceSeries, config: FitConfig) -> float:
    """RMSE of the slaved fit at ``theta``; ``inf`` when degenerate or ``t_c`` is in the window."""
    return slave_linear(theta, series, config.slaving, config.objective).rmse


def batch_objective(thetas: np.ndarray, series: PriceSeries, mode: Slaving, objective: Objective) -> np.ndarray:
    """Vectorised RMSE for a stack of nonlinear points, shape ``(k, d)``.

    Linear parameters come from the log-space normal equations; for the
    normalized objective they are not polished, so values are a search
    heuristic rather than exact minima.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    t = series.t
    y = series.log_values()
    k = thetas.shape[0]
    out = np.full(k, math.inf)
    tau = thetas[:, :1] - t[None, :]
    ok = np.all(tau > 0, axis=1) & np.all(np.isfinite(thetas), axis=1)
    if not np.any(ok):
        return out
    th = thetas[ok]
    log_tau = np.log(tau[ok])
    f = np.exp(th[:, 1:2] * log_tau)
    w = th[:, 2:3] * log_tau
    ones = np.ones_like(f)
    if mode == "four_linear":
        X = np.stack([ones, f, f * np.cos(w), f * np.sin(w)], axis=2)
    else:
        X = np.stack([ones, f, f * np.cos(w - th[:, 3:4])], axis=2)
    Xt = X.transpose(0, 2, 1)
    G = Xt @ X
    rhs = Xt @ y
    try:
        coef = np.linalg.solve(G, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        coef = np.empty_like(rhs)
        for i in range(G.shape[0]):
            try:
                coef[i] = np.linalg.solve(G[i], rhs[i])
            except np.linalg.LinAlgError:
                coef[i] = np.nan
    fitted = (X @ coef[..., None])[..., 0]
    if objective == "log_rmse":
        r = y[None, :] - fitted
    else:
        r = -np.expm1(fitted - y[None, :])
    vals = np.sqrt(np.mean(r * r, axis=1))
    vals[~np.isfinite(vals)] = math.inf
    out[ok] = vals
    return out
