"""JSON and CSV forms of series, fit ensembles and densities.

CSV floats are written with 17 significant digits so that parsing returns
the identical double. JSON uses Python's shortest round-trip repr.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from lppl.calibrate.fit import FitEnsemble, FitResult, Provenance
from lppl.forecast.kde import SampleSummary, TcDensity
from lppl.model import LpplParams, Qualification
from lppl.series import PriceSeries

_PARAMS = ("t_c", "m", "omega", "phi", "A", "B", "C")
FIT_COLUMNS = (
    "rank",
    "window_t1",
    "window_t2",
    "replica",
    "seed",
    *_PARAMS,
    "rmse",
    "hazard_margin",
    "qualified",
    "qualification",
    "start",
    "iterations",
    "status",
    "slaving",
    "objective",
    "residuals",
)
_EPOCH = date(2000, 1, 3)


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _join(xs) -> str:
    return " ".join(fmt(x) for x in xs)


def _split(s: str) -> list[float]:
    return [float(x) for x in s.split()] if s else []


def _header(manifest_hash: str | None, extra: dict[str, str] | None = None) -> str:
    lines = []
    if manifest_hash:
        lines.append(f"# manifest_sha256={manifest_hash}\n")
    for k, v in (extra or {}).items():
        lines.append(f"# {k}={v}\n")
    return "".join(lines)


def _read_commented_csv(text: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    meta: dict[str, str] = {}
    body = []
    for line in text.splitlines(keepends=True):
        if line.startswith("# "):
            k, _, v = line[2:].rstrip("\n").partition("=")
            meta[k] = v
        else:
            body.append(line)
    return meta, list(csv.DictReader(io.StringIO("".join(body))))


def fit_to_dict(f: FitResult) -> dict:
    return {
        "params": f.params.to_dict(),
        "rmse": f.rmse,
        "hazard_margin": f.hazard_margin,
        "qualification": f.qualification.to_dict(),
        "provenance": f.provenance.to_dict(),
        "residuals": [float(r) for r in f.residuals],
    }


def fit_from_dict(d: dict) -> FitResult:
    return FitResult(
        params=LpplParams.from_dict(d["params"]),
        rmse=float(d["rmse"]),
        residuals=np.asarray(d["residuals"], dtype=float),
        qualification=Qualification.from_dict(d["qualification"]),
        provenance=Provenance.from_dict(d["provenance"]),
    )


def ensemble_to_dict(ens: FitEnsemble) -> dict:
    return {"fits": [fit_to_dict(f) for f in ens.fits], "flags": list(ens.flags), "failures": list(ens.failures)}


def ensemble_from_dict(d: dict) -> FitEnsemble:
    return FitEnsemble([fit_from_dict(f) for f in d["fits"]], list(d["flags"]), list(d["failures"]))


def ensemble_to_csv(ens: FitEnsemble, manifest_hash: str | None = None) -> str:
    buf = io.StringIO()
    buf.write(
        _header(manifest_hash, {"flags": json.dumps(ens.flags), "failures": json.dumps(ens.failures)})
    )
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIT_COLUMNS)
    for rank, f in enumerate(ens.fits):
        p, pr = f.params, f.provenance
        w.writerow(
            [
                rank,
                fmt(pr.window[0]),
                fmt(pr.window[1]),
                "" if pr.replica is None else pr.replica,
                pr.seed,
                *(fmt(getattr(p, k)) for k in _PARAMS),
                fmt(f.rmse),
                fmt(f.hazard_margin),
                int(f.qualification.passed),
                json.dumps(f.qualification.to_dict()["checks"], sort_keys=True),
                _join(pr.start),
                pr.iterations,
                pr.status,
                pr.slaving,
                pr.objective,
                _join(f.residuals),
            ]
        )
    return buf.getvalue()


def ensemble_from_csv(text: str) -> FitEnsemble:
    meta, rows = _read_commented_csv(text)
    fits = []
    for row in rows:
        params = LpplParams(**{k: float(row[k]) for k in _PARAMS})
        checks = json.loads(row["qualification"])
        qual = Qualification(
            checks={k: (bool(v["passed"]), str(v["reason"])) for k, v in checks.items()},
            hazard_margin=float(row["hazard_margin"]),
        )
        prov = Provenance(
            window=(float(row["window_t1"]), float(row["window_t2"])),
            seed=int(row["seed"]),
            start=tuple(_split(row["start"])),
            iterations=int(row["iterations"]),
            status=row["status"],
            slaving=row["slaving"],
            objective=row["objective"],
            replica=int(row["replica"]) if row["replica"] else None,
        )
        fits.append(FitResult(params, float(row["rmse"]), np.asarray(_split(row["residuals"])), qual, prov))
    return FitEnsemble(fits, json.loads(meta.get("flags", "[]")), json.loads(meta.get("failures", "[]")))


def density_to_csv(d: TcDensity, manifest_hash: str | None = None) -> str:
    buf = io.StringIO()
    buf.write(_header(manifest_hash, {"parameter": d.parameter, "bandwidth": fmt(d.bandwidth)}))
    buf.write("grid,density\n")
    for g, v in zip(d.grid, d.density):
        buf.write(f"{fmt(g)},{fmt(v)}\n")
    return buf.getvalue()


def density_to_dict(d: TcDensity) -> dict:
    return {
        "parameter": d.parameter,
        "method": d.method,
        "bandwidth": d.bandwidth,
        "degenerate": d.degenerate,
        "summary": d.summary.to_dict(),
        "integral": d.integral(),
        "grid": [float(x) for x in d.grid],
        "density": [float(x) for x in d.density],
    }


def density_from_dict(d: dict) -> TcDensity:
    s = d["summary"]
    return TcDensity(
        grid=np.asarray(d["grid"], dtype=float),
        density=np.asarray(d["density"], dtype=float),
        bandwidth=float(d["bandwidth"]),
        summary=SampleSummary(**s),
        method=d["method"],
        parameter=d["parameter"],
        degenerate=bool(d["degenerate"]),
    )


def series_to_csv(series: PriceSeries, manifest_hash: str | None = None) -> str:
    """``t,date,log_price,price`` rows; dates are consecutive weekdays from 2000-01-03."""
    buf = io.StringIO()
    extra = {"crash_times": _join(series.crash_times)} if series.crash_times else None
    buf.write(_header(manifest_hash, extra))
    buf.write("t,date,log_price,price\n")
    logv = series.log_values()
    for i, (t, lv) in enumerate(zip(series.t, logv)):
        buf.write(f"{fmt(t)},{trading_day(i).isoformat()},{fmt(lv)},{fmt(np.exp(lv))}\n")
    return buf.getvalue()


def series_from_csv(text: str) -> PriceSeries:
    meta, rows = _read_commented_csv(text)
    t = [float(r["t"]) for r in rows]
    return PriceSeries(t[0], [float(r["log_price"]) for r in rows], "log", tuple(_split(meta.get("crash_times", ""))))


def series_to_dict(series: PriceSeries) -> dict:
    return {
        "t0": series.t0,
        "log_price": [float(v) for v in series.log_values()],
        "crash_times": list(series.crash_times),
    }


def series_from_dict(d: dict) -> PriceSeries:
    return PriceSeries(float(d["t0"]), d["log_price"], "log", tuple(d.get("crash_times", ())))


def trading_day(i: int) -> date:
    weeks, rem = divmod(i, 5)
    return _EPOCH + timedelta(days=7 * weeks + rem)


def curve_to_csv(series: PriceSeries, fit: FitResult, manifest_hash: str | None = None) -> str:
    """Observed and best-fit log-prices side by side for overlay plots."""
    buf = io.StringIO()
    buf.write(_header(manifest_hash))
    buf.write("t,observed,fitted\n")
    w = series.window(*fit.provenance.window)
    for t, y, f in zip(w.t, w.log_values(), fit.fitted(w.t)):
        buf.write(f"{fmt(t)},{fmt(y)},{fmt(f)}\n")
    return buf.getvalue()


def curve_to_dict(series: PriceSeries, fit: FitResult) -> dict:
    w = series.window(*fit.provenance.window)
    return {
        "t": [float(x) for x in w.t],
        "observed": [float(x) for x in w.log_values()],
        "fitted": [float(x) for x in fit.fitted(w.t)],
    }


def dumps_json(obj: dict, manifest_hash: str | None = None) -> str:
    if manifest_hash:
        obj = {**obj, "manifest_sha256": manifest_hash}
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(text)
    return path
