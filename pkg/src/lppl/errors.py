"""Exception hierarchy shared by the library and the CLI."""


class LpplError(Exception):
    """Base class for all errors raised by :mod:`lppl`."""


class DomainError(LpplError, ValueError):
    """A model was evaluated outside its domain, e.g. at or beyond ``t_c``."""


class ValidationError(LpplError, ValueError):
    """A configuration or input violates its documented constraints."""


class CalibrationError(LpplError, RuntimeError):
    """Calibration produced no usable fit."""
