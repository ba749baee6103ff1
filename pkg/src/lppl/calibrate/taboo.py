"""Continuous taboo search over the nonlinear LPPL parameters.

The search works in unit-cube coordinates. Each iteration samples a
neighbourhood around the current point, discards neighbours falling in the
box around any recently visited point (unless they beat the best value seen,
the aspiration rule) and moves to the best remaining neighbour even when it
is worse. Stalls alternate between a random restart and a return to the
incumbent with a halved step. Every evaluated point is archived; the output
pool holds the best archived points that are mutually separated, so distinct
basins survive to the refinement stage.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from lppl.calibrate.config import FitConfig, TabooConfig
from lppl.calibrate.slaving import batch_objective, n_nonlinear
from lppl.model import FitBounds
from lppl.series import PriceSeries
from lppl.simulate import path_seed

_STALL = 40
_INIT_FACTOR = 5


@dataclass(frozen=True)
class Candidate:
    theta: tuple[float, ...]
    value: float


class _Box:
    """Affine map between parameter space and the unit cube."""

    def __init__(self, bounds: FitBounds, dim: int):
        ranges = [bounds.tc, bounds.m, bounds.omega, bounds.phi][:dim]
        self.lo = np.array([r[0] for r in ranges])
        self.width = np.array([r[1] - r[0] for r in ranges])
        self.periodic = np.zeros(dim, dtype=bool)
        if dim == 4:
            self.periodic[3] = True

    def to_theta(self, u: np.ndarray) -> np.ndarray:
        return self.lo + u * self.width

    def fold(self, u: np.ndarray) -> np.ndarray:
        """Reflect at the cube faces (wrap periodic axes) so points stay inside."""
        u = np.where(self.periodic, np.mod(u, 1.0), u)
        u = np.mod(u, 2.0)
        return np.where(u > 1.0, 2.0 - u, u)


def _chain(evaluate, box: _Box, taboo: TabooConfig, dim: int, rng: np.random.Generator):
    steps = np.resize(np.asarray(taboo.step_scales, dtype=float), dim)
    us, vals = [], []

    def run(points: np.ndarray) -> np.ndarray:
        v = evaluate(box.to_theta(points))
        us.append(points)
        vals.append(v)
        return v

    init = rng.random((taboo.neighborhood * _INIT_FACTOR, dim))
    v0 = run(init)
    i0 = int(np.argmin(v0))
    current, current_val = init[i0], v0[i0]
    best, best_val = current.copy(), current_val
    tabu: deque[np.ndarray] = deque(maxlen=taboo.tabu_length)
    scale = 1.0
    stall = 0
    intensify = True
    for _ in range(taboo.iterations):
        radius = scale * steps
        cand = box.fold(current + rng.uniform(-1.0, 1.0, (taboo.neighborhood, dim)) * radius)
        cv = run(cand)
        if tabu:
            ref = np.asarray(tabu)
            near = np.all(np.abs(cand[:, None, :] - ref[None, :, :]) < 0.5 * radius, axis=2).any(axis=1)
            allowed = ~near | (cv < best_val)
        else:
            allowed = np.ones(len(cand), dtype=bool)
        tabu.append(current.copy())
        if np.any(allowed & np.isfinite(cv)):
            j = int(np.argmin(np.where(allowed, cv, np.inf)))
            current, current_val = cand[j], cv[j]
        if current_val < best_val:
            best, best_val = current.copy(), current_val
            stall = 0
        else:
            stall += 1
        if stall >= _STALL:
            stall = 0
            if intensify:
                current, current_val = best.copy(), best_val
                scale = max(scale * 0.5, 1e-3)
            else:
                pts = rng.random((taboo.neighborhood, dim))
                pv = run(pts)
                j = int(np.argmin(pv))
                current, current_val = pts[j], pv[j]
                scale = 1.0
            intensify = not intensify
    return np.concatenate(us), np.concatenate(vals)


def _select_pool(us: np.ndarray, vals: np.ndarray, steps: np.ndarray, size: int) -> list[int]:
    # Best-first greedy pick; a point is redundant when it lies inside the
    # half-step box of an already selected point.
    order = np.lexsort((np.arange(len(vals)), vals))
    chosen: list[int] = []
    for i in order:
        if not np.isfinite(vals[i]):
            break
        if chosen and np.any(np.all(np.abs(us[chosen] - us[i]) < 0.5 * steps, axis=1)):
            continue
        chosen.append(int(i))
        if len(chosen) == size:
            break
    return chosen


def taboo_search(series: PriceSeries, config: FitConfig) -> list[Candidate]:
    """Pool of diverse low-objective nonlinear points, sorted by objective."""
    bounds = config.resolve_bounds(series)
    dim = n_nonlinear(config.slaving)
    box = _Box(bounds, dim)
    taboo = config.taboo

    def evaluate(thetas: np.ndarray) -> np.ndarray:
        return batch_objective(thetas, series, config.slaving, config.objective)

    all_u, all_v = [], []
    for r in range(config.restarts):
        rng = np.random.default_rng(path_seed(taboo.seed, r))
        u, v = _chain(evaluate, box, taboo, dim, rng)
        all_u.append(u)
        all_v.append(v)
    us = np.concatenate(all_u)
    vals = np.concatenate(all_v)
    steps = np.resize(np.asarray(taboo.step_scales, dtype=float), dim)
    chosen = _select_pool(us, vals, steps, taboo.pool_size)
    return [Candidate(tuple(float(x) for x in box.to_theta(us[i])), float(vals[i])) for i in chosen]
