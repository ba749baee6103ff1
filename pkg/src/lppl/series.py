from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from lppl.errors import ValidationError

Scale = Literal["log", "raw"]


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Uniformly spaced series on the integer day grid ``t0, t0+1, ...``.

    ``scale="log"`` means ``values`` are log-prices; ``"raw"`` means prices.
    """

    t0: float
    values: np.ndarray
    scale: Scale = "log"
    crash_times: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError("series values must be a nonempty 1-D array")
        if self.scale not in ("log", "raw"):
            raise ValidationError(f"unknown scale {self.scale!r}")
        if self.scale == "raw" and np.any(values <= 0):
            raise ValidationError("raw-scale series must be strictly positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "crash_times", tuple(float(c) for c in self.crash_times))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.scale == other.scale
            and self.crash_times == other.crash_times
            and np.array_equal(self.values, other.values)
        )

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size, dtype=float)

    @property
    def t1(self) -> float:
        return self.t0

    @property
    def t2(self) -> float:
        return self.t0 + self.values.size - 1

    @property
    def crash_time(self) -> float | None:
        return self.crash_times[0] if self.crash_times else None

    def log_values(self) -> np.ndarray:
        return self.values if self.scale == "log" else np.log(self.values)

    def window(self, t1: float, t2: float) -> PriceSeries:
        """Sub-series covering the closed day range ``[t1, t2]``."""
        i1 = int(round(t1 - self.t0))
        i2 = int(round(t2 - self.t0))
        if not (0 <= i1 <= i2 < self.values.size):
            raise ValidationError(f"window [{t1}, {t2}] outside series extent [{self.t1}, {self.t2}]")
        return PriceSeries(self.t0 + i1, self.values[i1 : i2 + 1], self.scale)

    def with_values(self, values: np.ndarray) -> PriceSeries:
        return PriceSeries(self.t0, values, self.scale)
