from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from lppl.calibrate.config import MIN_WINDOW, FitConfig
from lppl.calibrate.refine import lm_refine
from lppl.calibrate.taboo import taboo_search
from lppl.errors import ValidationError
from lppl.model import LpplParams, Qualification, eval_lppl, hazard_margin, qualify
from lppl.series import PriceSeries

# clone tolerances for two refined optima
_DUP_TC = 0.5
_DUP_M = 0.005
_DUP_OMEGA = 0.05
_DUP_RMSE = 1e-6
_DUP_RMSE_FLOOR = 1e-12

# fraction of qualified fits below which an ensemble is flagged low-confidence
LOW_CONFIDENCE = 0.5


@dataclass(frozen=True)
class Provenance:
    window: tuple[float, float]
    seed: int
    start: tuple[float, ...]
    iterations: int
    status: str
    slaving: str = "four_linear"
    objective: str = "log_rmse"
    replica: int | None = None

    def to_dict(self) -> dict:
        return {
            "window": [float(self.window[0]), float(self.window[1])],
            "seed": int(self.seed),
            "start": [float(x) for x in self.start],
            "iterations": int(self.iterations),
            "status": self.status,
            "slaving": self.slaving,
            "objective": self.objective,
            "replica": self.replica,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Provenance:
        return cls(
            window=(float(d["window"][0]), float(d["window"][1])),
            seed=int(d["seed"]),
            start=tuple(float(x) for x in d["start"]),
            iterations=int(d["iterations"]),
            status=str(d["status"]),
            slaving=str(d.get("slaving", "four_linear")),
            objective=str(d.get("objective", "log_rmse")),
            replica=None if d.get("replica") is None else int(d["replica"]),
        )


@dataclass(frozen=True, eq=False)
class FitResult:
    params: LpplParams
    rmse: float
    residuals: np.ndarray
    qualification: Qualification
    provenance: Provenance

    @property
    def hazard_margin(self) -> float:
        return hazard_margin(self.params)

    def fitted(self, t: np.ndarray) -> np.ndarray:
        """Fitted log-price at times ``t``."""
        return np.asarray(eval_lppl(self.params, t))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FitResult):
            return NotImplemented
        return (
            self.params == other.params
            and self.rmse == other.rmse
            and np.array_equal(self.residuals, other.residuals)
            and self.qualification == other.qualification
            and self.provenance == other.provenance
        )


@dataclass(eq=True)
class FitEnsemble:
    """Retained fits, best first, plus flags and a log of failures."""

    fits: list[FitResult] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.fits)

    def __iter__(self):
        return iter(self.fits)

    @property
    def best(self) -> FitResult:
        if not self.fits:
            raise ValidationError("empty ensemble has no best fit")
        return self.fits[0]

    def samples(self, name: str) -> np.ndarray:
        return np.array([getattr(f.params, name) for f in self.fits], dtype=float)

    def qualified_fraction(self) -> float:
        if not self.fits:
            return 0.0
        return sum(f.qualification.passed for f in self.fits) / len(self.fits)

    def extend(self, other: FitEnsemble) -> None:
        self.fits.extend(other.fits)
        self.flags.extend(f for f in other.flags if f not in self.flags)
        self.failures.extend(other.failures)


def _sort_key(f: FitResult) -> tuple[float, float, float]:
    return (f.rmse, -f.hazard_margin, abs(f.params.m - 0.5))


def _is_clone(a: FitResult, b: FitResult) -> bool:
    pa, pb = a.params, b.params
    close_rmse = abs(a.rmse - b.rmse) < _DUP_RMSE * max(a.rmse, b.rmse) + _DUP_RMSE_FLOOR
    return (
        abs(pa.t_c - pb.t_c) < _DUP_TC
        and abs(pa.m - pb.m) < _DUP_M
        and abs(pa.omega - pb.omega) < _DUP_OMEGA
        and close_rmse
    )


def deduplicate(fits: list[FitResult], drop_clones: bool = True) -> list[FitResult]:
    """Sort by objective (ties: larger hazard margin, then m nearer 0.5) and drop clones."""
    ordered = sorted(fits, key=_sort_key)
    if not drop_clones:
        return ordered
    kept: list[FitResult] = []
    for f in ordered:
        if not any(_is_clone(f, k) for k in kept):
            kept.append(f)
    return kept


def refine_to_fit(start: tuple[float, ...], series: PriceSeries, config: FitConfig) -> FitResult | None:
    """Run :func:`lm_refine` from ``start`` and package the result; None if degenerate."""
    bounds = config.resolve_bounds(series)
    out = lm_refine(start, series, config)
    slaved = out.slaved
    if slaved.degenerate or slaved.params is None:
        return None
    assert slaved.sse <= out.start_sse, "refinement must not worsen the objective"
    return FitResult(
        params=slaved.params,
        rmse=slaved.rmse,
        residuals=slaved.residuals,
        qualification=qualify(slaved.params, bounds),
        provenance=Provenance(
            window=(series.t1, series.t2),
            seed=config.seed,
            start=tuple(start),
            iterations=out.iterations,
            status=out.status,
            slaving=config.slaving,
            objective=config.objective,
        ),
    )


def fit(series: PriceSeries, config: FitConfig | None = None) -> FitEnsemble:
    """Taboo exploration, LM refinement of every pool point, top-``k`` distinct optima."""
    config = config or FitConfig()
    if len(series) < MIN_WINDOW:
        raise ValidationError(f"window has {len(series)} points; at least {MIN_WINDOW} are required")
    candidates = taboo_search(series, config)
    results: list[FitResult] = []
    failures: list[str] = []
    for c in candidates:
        res = refine_to_fit(c.theta, series, config)
        if res is None:
            failures.append(f"degenerate refinement from {c.theta}")
        else:
            results.append(res)
    kept = deduplicate(results, config.dedupe)[: config.top_k]
    ens = FitEnsemble(kept, [], failures)
    if len(kept) < config.top_k:
        ens.flags.append("insufficient_optima")
    if kept and ens.qualified_fraction() < LOW_CONFIDENCE:
        ens.flags.append("low_confidence")
    if any(f.provenance.status == "max-iter" for f in kept):
        ens.flags.append("max-iter")
    return ens


def tag_replica(ens: FitEnsemble, replica: int) -> FitEnsemble:
    fits = [replace(f, provenance=replace(f.provenance, replica=replica)) for f in ens.fits]
    return FitEnsemble(fits, list(ens.flags), list(ens.failures))
