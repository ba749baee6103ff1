from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lppl.calibrate.config import MIN_WINDOW, FitConfig
from lppl.calibrate.fit import FitEnsemble, fit, tag_replica
from lppl.errors import CalibrationError, LpplError, ValidationError
from lppl.forecast.kde import GridSpec, Method, TcDensity, kde
from lppl.forecast.replicas import ReplicaSpec, make_replicas
from lppl.series import PriceSeries


@dataclass(frozen=True)
class ScanPlan:
    """Windows ``[t1, t2]`` for every ``t1`` in ``t1_list``, all fitted with ``config``."""

    t1_list: tuple[float, ...]
    t2: float
    config: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "t1_list", tuple(float(t) for t in self.t1_list))
        if not self.t1_list:
            raise ValidationError("scan plan needs at least one window start")

    def validate(self, series: PriceSeries) -> None:
        if not series.t1 <= self.t2 <= series.t2:
            raise ValidationError(f"t2={self.t2} outside series extent [{series.t1}, {series.t2}]")
        for t1 in self.t1_list:
            if not t1 < self.t2:
                raise ValidationError(f"window start {t1} is not before t2={self.t2}")
            if t1 < series.t1:
                raise ValidationError(f"window start {t1} precedes the series start {series.t1}")
            n = int(round(self.t2 - t1)) + 1
            if n < MIN_WINDOW:
                raise ValidationError(f"window [{t1}, {self.t2}] has {n} points; minimum is {MIN_WINDOW}")

    def to_dict(self) -> dict:
        return {"t1_list": list(self.t1_list), "t2": self.t2, "config": self.config.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> ScanPlan:
        return cls(tuple(d["t1_list"]), float(d["t2"]), FitConfig.from_dict(d["config"]))


def scan_windows(series: PriceSeries, plan: ScanPlan) -> FitEnsemble:
    """Fit every window of ``plan``; failed windows are logged, not fatal.

    Windows are not deduplicated against each other.
    """
    plan.validate(series)
    out = FitEnsemble()
    ok = 0
    for t1 in plan.t1_list:
        window = series.window(t1, plan.t2)
        try:
            ens = fit(window, plan.config)
        except LpplError as exc:
            out.failures.append(f"window [{t1}, {plan.t2}]: {exc}")
            continue
        if not ens.fits:
            out.failures.append(f"window [{t1}, {plan.t2}]: no fit retained")
            continue
        ok += 1
        out.extend(ens)
    if ok == 0:
        raise CalibrationError("every window failed: " + "; ".join(out.failures))
    return out


def replica_seed(base_seed: int, t1: float, index: int) -> int:
    """Derived calibration seed for replica ``index`` of the window starting at ``t1``."""
    ss = np.random.SeedSequence([int(base_seed), int(round(t1)), int(index)])
    return int(ss.generate_state(1)[0])


def replica_ensemble(series: PriceSeries, plan: ScanPlan, base: FitEnsemble, spec: ReplicaSpec) -> FitEnsemble:
    """Refit replicas of each window's best fit with the window's own configuration."""
    out = FitEnsemble()
    for t1 in plan.t1_list:
        fits = [f for f in base.fits if f.provenance.window[0] == t1]
        if not fits:
            continue
        window = series.window(t1, plan.t2)
        for i, rep in enumerate(make_replicas(window, fits[0], spec)):
            cfg = plan.config.with_seed(replica_seed(plan.config.seed, t1, i))
            try:
                ens = fit(rep, cfg)
            except LpplError as exc:
                out.failures.append(f"replica {i} of window [{t1}, {plan.t2}]: {exc}")
                continue
            out.extend(tag_replica(ens, i))
    return out


@dataclass
class Forecast:
    ensemble: FitEnsemble
    density: TcDensity
    pooled: int


def forecast_tc(
    series: PriceSeries,
    plan: ScanPlan,
    replicas: ReplicaSpec | None = None,
    *,
    qualified_only: bool = True,
    grid: GridSpec | np.ndarray | None = None,
    method: Method = "adaptive",
) -> Forecast:
    """Window scan, optional replica refits, and the pooled ``t_c`` density.

    All retained fits are pooled with uniform weight; with
    ``qualified_only`` fits failing qualification are left out of the density.
    """
    ens = scan_windows(series, plan)
    if replicas is not None:
        ens.extend(replica_ensemble(series, plan, ens, replicas))
    pool = [f for f in ens.fits if f.qualification.passed] if qualified_only else list(ens.fits)
    if not pool:
        raise CalibrationError("no qualified fit to build a density from")
    tcs = np.array([f.params.t_c for f in pool])
    return Forecast(ens, kde(tcs, grid, method), len(pool))
