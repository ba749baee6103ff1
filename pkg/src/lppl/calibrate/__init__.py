"""Calibration of the LPPL model: slaving, taboo search, LM refinement."""

from lppl.calibrate.config import MIN_WINDOW, FitConfig, RefineConfig, TabooConfig
from lppl.calibrate.fit import FitEnsemble, FitResult, Provenance, deduplicate, fit, refine_to_fit
from lppl.calibrate.refine import RefineOutcome, lm_refine
from lppl.calibrate.slaving import Slaved, batch_objective, objective, slave_linear
from lppl.calibrate.taboo import Candidate, taboo_search

__all__ = [
    "MIN_WINDOW",
    "Candidate",
    "FitConfig",
    "FitEnsemble",
    "FitResult",
    "Provenance",
    "RefineConfig",
    "RefineOutcome",
    "Slaved",
    "TabooConfig",
    "batch_objective",
    "deduplicate",
    "fit",
    "lm_refine",
    "objective",
    "refine_to_fit",
    "slave_linear",
    "taboo_search",
]
