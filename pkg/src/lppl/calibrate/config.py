from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Literal

from lppl.errors import ValidationError
from lppl.model import FitBounds
from lppl.series import PriceSeries

Slaving = Literal["four_linear", "three_linear"]
Objective = Literal["log_rmse", "normalized_price_rmse"]

MIN_WINDOW = 30


@dataclass(frozen=True)
class TabooConfig:
    """Knobs of the taboo exploration.

    ``step_scales`` are neighbourhood half-widths as fractions of each
    nonlinear parameter's range, ordered ``(t_c, m, omega[, phi])``.
    """

    iterations: int = 500
    neighborhood: int = 20
    tabu_length: int = 50
    step_scales: tuple[float, ...] = (0.1, 0.1, 0.1, 0.1)
    pool_size: int = 30
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("iterations", "neighborhood", "tabu_length"):
            if getattr(self, name) < 1:
                raise ValidationError(f"taboo {name} must be >= 1")
        if self.pool_size < 2:
            raise ValidationError("taboo pool_size must be >= 2: the search keeps many candidates")
        if len(self.step_scales) < 3 or any(not 0 < s <= 1 for s in self.step_scales):
            raise ValidationError("step_scales need >= 3 entries in (0, 1]")


@dataclass(frozen=True)
class RefineConfig:
    gtol: float = 1e-10
    xtol: float = 1e-10
    ftol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self) -> None:
        if min(self.gtol, self.xtol, self.ftol) <= 0 or self.max_iter < 1:
            raise ValidationError("refine tolerances must be positive and max_iter >= 1")


@dataclass(frozen=True)
class FitConfig:
    """Calibration settings.

    When ``bounds`` is None, :meth:`FitBounds.default` is applied to each
    window with the ``enforce_*`` switches below. ``dedupe=False`` keeps
    numerically identical optima, so ``top_k`` counts refined candidates
    rather than distinct minima.
    """

    bounds: FitBounds | None = None
    enforce_m_range: bool = True
    enforce_b_negative: bool = True
    enforce_hazard: bool = False
    slaving: Slaving = "four_linear"
    objective: Objective = "log_rmse"
    taboo: TabooConfig = field(default_factory=TabooConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    top_k: int = 10
    restarts: int = 1
    dedupe: bool = True

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValidationError("top_k must be >= 1")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.slaving not in ("four_linear", "three_linear"):
            raise ValidationError(f"unknown slaving mode {self.slaving!r}")
        if self.objective not in ("log_rmse", "normalized_price_rmse"):
            raise ValidationError(f"unknown objective {self.objective!r}")

    @property
    def seed(self) -> int:
        return self.taboo.seed

    def with_seed(self, seed: int) -> FitConfig:
        return replace(self, taboo=replace(self.taboo, seed=int(seed)))

    def resolve_bounds(self, series: PriceSeries) -> FitBounds:
        if self.bounds is not None:
            bounds = self.bounds
        else:
            bounds = FitBounds.default(
                series.t2,
                len(series),
                enforce_m_range=self.enforce_m_range,
                enforce_b_negative=self.enforce_b_negative,
                enforce_hazard=self.enforce_hazard,
            )
        bounds.check_window(series.t2)
        return bounds

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounds"] = None if self.bounds is None else self.bounds.to_dict()
        d["taboo"]["step_scales"] = list(self.taboo.step_scales)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FitConfig:
        d = dict(d)
        if d.get("bounds") is not None:
            d["bounds"] = FitBounds.from_dict(d["bounds"])
        if "taboo" in d:
            t = dict(d["taboo"])
            if "step_scales" in t:
                t["step_scales"] = tuple(float(s) for s in t["step_scales"])
            d["taboo"] = TabooConfig(**t)
        if "refine" in d:
            d["refine"] = RefineConfig(**d["refine"])
        return cls(**d)
