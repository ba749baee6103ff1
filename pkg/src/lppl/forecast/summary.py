from __future__ import annotations

from lppl.calibrate.fit import FitEnsemble
from lppl.errors import ValidationError
from lppl.forecast.kde import SampleSummary, summarize_samples

PARAMETERS = ("t_c", "m", "omega")


def summarize(ensemble: FitEnsemble, parameters: tuple[str, ...] = PARAMETERS) -> dict[str, SampleSummary]:
    """Uniformly weighted mean, std and quantiles of each parameter over all retained fits."""
    if not ensemble.fits:
        raise ValidationError("cannot summarize an empty ensemble")
    return {name: summarize_samples(ensemble.samples(name)) for name in parameters}
