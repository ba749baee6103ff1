"""JLS log-periodic power law bubble model: simulation, calibration, forecasting."""

__version__ = "0.1.0"
