"""LPPL forward model, crash hazard rate and bubble qualification.

All functions here are pure. Times are measured in days on the same axis as
the series index; ``t_c`` may be fractional.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import numpy.typing as npt

from lppl.errors import DomainError, ValidationError

TWO_PI = 2.0 * math.pi
_PIN_TOL = 1e-6

ArrayLike = float | npt.ArrayLike


@dataclass(frozen=True)
class LpplParams:
    """The seven parameters of the first-order LPPL log-price formula."""

    t_c: float
    m: float
    omega: float
    phi: float
    A: float
    B: float
    C: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.t_c):
            raise ValidationError(f"t_c must be finite, got {self.t_c}")

    @property
    def nonlinear(self) -> tuple[float, float, float, float]:
        return (self.t_c, self.m, self.omega, self.phi)

    def to_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> LpplParams:
        return cls(**{k: float(d[k]) for k in ("t_c", "m", "omega", "phi", "A", "B", "C")})


@dataclass(frozen=True)
class HazardParams:
    """Parameters of the crash hazard rate ``h(t)``.

    ``B_prime`` and ``C_prime`` are in 1/day; ``kappa`` is the fraction of
    the price lost in a crash.
    """

    t_c: float
    m: float
    omega: float
    B_prime: float
    C_prime: float
    phi_prime: float
    kappa: float


@dataclass(frozen=True)
class FitBounds:
    """Search ranges for the nonlinear parameters plus qualification switches.

    Ranges are closed intervals ``(lo, hi)``. ``phi`` is periodic and is
    compared modulo ``2*pi``.
    """

    tc: tuple[float, float]
    m: tuple[float, float] = (0.01, 0.99)
    omega: tuple[float, float] = (2.0, 25.0)
    phi: tuple[float, float] = (0.0, TWO_PI)
    enforce_m_range: bool = True
    enforce_b_negative: bool = True
    enforce_hazard: bool = False

    def __post_init__(self) -> None:
        for name in ("tc", "m", "omega", "phi"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValidationError(f"bound {name}={getattr(self, name)} is not a nonempty interval")

    @classmethod
    def default(
        cls,
        t2: float,
        window_length: int,
        *,
        enforce_m_range: bool = True,
        enforce_b_negative: bool = True,
        enforce_hazard: bool = False,
    ) -> FitBounds:
        """Default ranges for a window ending at ``t2``.

        With ``enforce_m_range`` off, ``m`` is searched over ``[-5, 5]`` so
        that out-of-range exponents can serve as a no-bubble diagnostic.
        """
        m_range = (0.01, 0.99) if enforce_m_range else (-5.0, 5.0)
        return cls(
            tc=(t2 + 1e-2, t2 + float(window_length)),
            m=m_range,
            enforce_m_range=enforce_m_range,
            enforce_b_negative=enforce_b_negative,
            enforce_hazard=enforce_hazard,
        )

    def check_window(self, t2: float) -> None:
        if not self.tc[0] > t2:
            raise ValidationError(f"t_c lower bound {self.tc[0]} must exceed the window end {t2}")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("tc", "m", "omega", "phi"):
            d[k] = [float(v) for v in d[k]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FitBounds:
        d = dict(d)
        for k in ("tc", "m", "omega", "phi"):
            if k in d:
                d[k] = tuple(float(v) for v in d[k])
        return cls(**d)


def _time_to_critical(t_c: float, t: ArrayLike) -> np.ndarray:
    tau = t_c - np.asarray(t, dtype=float)
    if np.any(~(tau > 0)):
        raise DomainError(f"LPPL is only defined for t < t_c={t_c}")
    return tau


def eval_lppl(params: LpplParams, t: ArrayLike) -> float | np.ndarray:
    """Expected log-price ``A + B tau^m + C tau^m cos(omega ln tau - phi)``."""
    tau = _time_to_critical(params.t_c, t)
    tau_m = tau**params.m
    out = params.A + params.B * tau_m + params.C * tau_m * np.cos(params.omega * np.log(tau) - params.phi)
    return float(out) if out.ndim == 0 else out


def eval_hazard(h: HazardParams, t: ArrayLike) -> float | np.ndarray:
    """Crash hazard rate in 1/day; diverges at ``t_c`` when ``m < 1``."""
    tau = _time_to_critical(h.t_c, t)
    tau_m1 = tau ** (h.m - 1.0)
    out = h.B_prime * tau_m1 + h.C_prime * tau_m1 * np.cos(h.omega * np.log(tau) - h.phi_prime)
    return float(out) if out.ndim == 0 else out


def hazard_margin(params: LpplParams) -> float:
    """The quantity ``b = -B m - |C| sqrt(m^2 + omega^2)``; ``b >= 0`` passes."""
    return -params.B * params.m - abs(params.C) * math.hypot(params.m, params.omega)


def phase_shift(m: float, omega: float) -> float:
    # d/ds [e^{ms} cos(ws - a - psi)] = R e^{ms} cos(ws - a) with R = hypot(m, w),
    # psi = atan2(w, m); integrating the hazard therefore gives phi = phi' + psi.
    return math.atan2(omega, m)


def to_hazard_params(params: LpplParams, kappa: float) -> HazardParams:
    """Hazard parameters whose integral reproduces ``params`` (up to ``A``)."""
    if not 0.0 < kappa < 1.0:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    if params.m == 0.0:
        raise DomainError("m = 0 has no hazard-rate counterpart")
    r = math.hypot(params.m, params.omega)
    return HazardParams(
        t_c=params.t_c,
        m=params.m,
        omega=params.omega,
        B_prime=-params.m * params.B / kappa,
        C_prime=-params.C * r / kappa,
        phi_prime=params.phi - phase_shift(params.m, params.omega),
        kappa=kappa,
    )


def from_hazard_params(h: HazardParams, A: float = 0.0) -> LpplParams:
    """Inverse of :func:`to_hazard_params`; ``A`` is not determined by ``h``."""
    if h.m == 0.0:
        raise DomainError("m = 0 has no LPPL counterpart")
    r = math.hypot(h.m, h.omega)
    return LpplParams(
        t_c=h.t_c,
        m=h.m,
        omega=h.omega,
        phi=h.phi_prime + phase_shift(h.m, h.omega),
        A=A,
        B=-h.kappa * h.B_prime / h.m,
        C=-h.kappa * h.C_prime / r,
    )


@dataclass(frozen=True)
class Qualification:
    """Per-criterion verdicts. ``checks`` maps a criterion to ``(passed, reason)``."""

    checks: dict[str, tuple[bool, str]] = field(default_factory=dict)
    hazard_margin: float = float("nan")

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    @property
    def failures(self) -> list[str]:
        return [reason for ok, reason in self.checks.values() if not ok]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "hazard_margin": self.hazard_margin,
            "checks": {k: {"passed": ok, "reason": reason} for k, (ok, reason) in self.checks.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> Qualification:
        checks = {k: (bool(v["passed"]), str(v["reason"])) for k, v in d["checks"].items()}
        return cls(checks=checks, hazard_margin=float(d["hazard_margin"]))


def _in(value: float, rng: tuple[float, float]) -> bool:
    return rng[0] <= value <= rng[1]


def qualify(params: LpplParams, bounds: FitBounds) -> Qualification:
    """Check ``params`` against the range filters and the enabled bubble criteria."""
    checks: dict[str, tuple[bool, str]] = {}
    b = hazard_margin(params)
    if bounds.enforce_m_range:
        ok = 0.0 < params.m < 1.0
        checks["m_range"] = (ok, "" if ok else "m outside (0,1)")
    if bounds.enforce_b_negative:
        ok = params.B < 0.0
        checks["b_negative"] = (ok, "" if ok else "B is not negative")
    if bounds.enforce_hazard:
        ok = b >= 0.0
        checks["hazard"] = (ok, "" if ok else f"hazard margin b={b:.6g} < 0")
    for name, value, rng in (
        ("t_c", params.t_c, bounds.tc),
        ("m", params.m, bounds.m),
        ("omega", params.omega, bounds.omega),
    ):
        ok = _in(value, rng)
        checks[f"{name}_bounds"] = (ok, "" if ok else f"{name}={value:.6g} outside [{rng[0]:.6g}, {rng[1]:.6g}]")
    # an optimum resting on a search bound is an artefact of the bound, not a minimum
    pinned = [
        name
        for name, value, (lo, hi) in (
            ("t_c", params.t_c, bounds.tc),
            ("m", params.m, bounds.m),
            ("omega", params.omega, bounds.omega),
        )
        if _in(value, (lo, hi)) and min(value - lo, hi - value) <= _PIN_TOL * (hi - lo)
    ]
    checks["interior"] = (not pinned, "" if not pinned else "pinned at search bound: " + ", ".join(pinned))
    phi = params.phi % TWO_PI
    lo, hi = bounds.phi
    ok = hi - lo >= TWO_PI or _in(phi, (lo, hi))
    checks["phi_bounds"] = (ok, "" if ok else f"phi={phi:.6g} outside [{lo:.6g}, {hi:.6g}]")
    return Qualification(checks=checks, hazard_margin=b)
