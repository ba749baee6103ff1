"""``lppl`` command line: simulate, fit, scan, forecast, benchmark.

Every command first resolves its flags into a manifest, writes it, then
runs from the manifest alone. ``--manifest FILE`` skips the first step, so
a rerun repeats the original computation and rewrites identical bytes.

Exit codes: 0 success, 2 invalid input or configuration, 3 calibration
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from lppl.calibrate.config import FitConfig, RefineConfig, TabooConfig
from lppl.calibrate.fit import FitEnsemble, fit
from lppl.cli import manifest as mf
from lppl.cli import serialize as io
from lppl.cli.benchmark import NOISE_KINDS, REFERENCE, BenchmarkConfig, run_benchmark
from lppl.cli.ingest import ingest
from lppl.errors import CalibrationError, LpplError, ValidationError
from lppl.forecast.kde import GridSpec
from lppl.forecast.replicas import ReplicaSpec
from lppl.forecast.scan import ScanPlan, forecast_tc, scan_windows
from lppl.forecast.summary import summarize
from lppl.model import LpplParams, eval_lppl, to_hazard_params
from lppl.series import PriceSeries
from lppl.simulate import NoiseSpec, SdeParams, add_noise, generate_reference, simulate_jls

log = logging.getLogger("lppl")

OUTPUT_ENV = "LPPL_OUTPUT_DIR"
DEFAULT_OUTPUT = "lppl_out"
EXIT_OK, EXIT_INVALID, EXIT_CALIBRATION = 0, 2, 3


class Artifacts:
    """Writes the run's files into one directory, stamped with the manifest hash."""

    def __init__(self, out: Path, manifest: dict):
        self.out = out
        self.fmt = manifest["format"]
        self.hash = mf.manifest_hash(manifest)
        self.written: list[Path] = []
        self._put(mf.MANIFEST_NAME, mf.to_text(manifest))

    def text(self, name: str, text: str) -> None:
        self._put(name, text)

    def _put(self, name: str, text: str) -> None:
        self.written.append(io.write_text(self.out / name, text))

    def json(self, name: str, obj: dict) -> None:
        self._put(name + ".json", io.dumps_json(obj, self.hash))

    def table(self, name: str, csv_text: str, obj: dict) -> None:
        if self.fmt == "csv":
            self._put(name + ".csv", csv_text)
        else:
            self.json(name, obj)


# ---------------------------------------------------------------- parsing


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", type=Path, help="rerun exactly from a manifest; other run flags are ignored")
    p.add_argument("--out", type=Path, help=f"output directory (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format (default csv)")
    p.add_argument("--seed", type=int, default=0, help="base seed recorded in every artifact")
    p.add_argument("-v", "--verbose", action="store_true")


def _input_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input")
    g.add_argument("--input", type=Path, help="CSV with a header row and ISO dates")
    g.add_argument("--date-col", default="date")
    g.add_argument("--price-col", default="close")
    g.add_argument("--input-scale", choices=("price", "log"), default="price", help="column holds prices or log-prices")
    g.add_argument("--no-log", action="store_true", help="keep raw prices instead of log-transforming")
    g.add_argument("--t0", type=float, default=0.0, help="time index of the first row (default 0)")


def _fit_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("calibration")
    g.add_argument("--fit-config", type=Path, help="JSON FitConfig; flags below override its fields")
    g.add_argument("--top-k", type=int)
    g.add_argument("--iterations", type=int, help="taboo iterations")
    g.add_argument("--neighborhood", type=int, help="taboo neighbours per iteration")
    g.add_argument("--pool-size", type=int, help="taboo candidates passed to refinement")
    g.add_argument("--restarts", type=int, help="independent taboo chains")
    g.add_argument("--max-iter", type=int, help="Levenberg-Marquardt iteration cap")
    g.add_argument("--slaving", choices=("four_linear", "three_linear"))
    g.add_argument("--objective", choices=("log_rmse", "normalized_price_rmse"))
    g.add_argument("--enforce-hazard", action="store_true", help="require a nonnegative hazard rate")
    g.add_argument("--no-m-range", action="store_true", help="search m freely; do not require 0 < m < 1")
    g.add_argument("--no-b-negative", action="store_true", help="do not require B < 0")
    g.add_argument("--no-dedupe", action="store_true", help="keep numerically identical optima")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lppl", description="LPPL bubble calibration and critical-time forecasts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic series")
    _common(p)
    p.add_argument("--kind", choices=("reference", "noisy", "jls"), default="reference")
    for name, default in REFERENCE.to_dict().items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=f"p_{name}", type=float, default=default)
    p.add_argument("--n", type=int, default=240, help="number of daily points")
    p.add_argument("--start", type=float, default=1.0, help="time of the first point")
    p.add_argument("--noise", choices=("gaussian", "student_t4"), default="gaussian")
    p.add_argument("--relative-std", type=float, default=0.05, help="noise std as a fraction of the max log-price")
    p.add_argument("--sigma", type=float, default=0.0, help="diffusion volatility per sqrt(day)")
    p.add_argument("--kappa", type=float, default=0.2, help="crash size as a fraction of the price")
    p.add_argument("--dt", type=float, default=0.01, help="Euler step in days")
    p.add_argument("--p0", type=float, help="initial price (default: the LPPL price at --start)")
    p.add_argument("--scheme", choices=("euler", "exact"), default="euler")
    p.add_argument("--no-crash", action="store_true", help="simulate the no-crash dynamics")

    p = sub.add_parser("fit", help="calibrate one window")
    _common(p)
    _input_args(p)
    _fit_args(p)
    p.add_argument("--t1", type=float, help="window start (default: first point)")
    p.add_argument("--t2", type=float, help="window end (default: last point)")
    p.add_argument("--require-qualified", action="store_true", help="exit 3 unless some fit qualifies")

    for name, text in (("scan", "calibrate a family of windows"), ("forecast", "pooled critical-time density")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _input_args(p)
        _fit_args(p)
        p.add_argument("--t2", type=float, help="common window end (default: last point)")
        p.add_argument("--t1-list", type=_floats, help="window starts, e.g. 1,21,41")
        p.add_argument("--t1-range", type=_floats, metavar="START,STOP,STEP", help="window starts from a range")
        if name == "forecast":
            p.add_argument("--replicas", type=int, default=20, help="replica series per window (0: none)")
            p.add_argument("--replica-method", choices=("block_bootstrap", "ar1"), default="block_bootstrap")
            p.add_argument("--block-len", type=_ints, default=(25,), help="bootstrap block length(s)")
            p.add_argument("--all-fits", action="store_true", help="pool unqualified fits too")
            p.add_argument("--kde", choices=("adaptive", "silverman"), default="adaptive")
            p.add_argument("--grid-n", type=int, default=1024)
            p.add_argument("--grid-lo", type=float)
            p.add_argument("--grid-hi", type=float)

    p = sub.add_parser("benchmark", help="synthetic calibration benchmark with pass/fail report")
    _common(p)
    p.add_argument("--realizations", type=int, default=200, help="series per noise type")
    p.add_argument("--kinds", default="gaussian,student_t4")
    p.add_argument("--workers", type=int, default=1, help="processes (results do not depend on this)")
    p.add_argument("--checkpoint", type=Path, help="JSONL progress file (default: in the output directory)")
    p.add_argument("--no-checkpoint", action="store_true")
    _fit_args(p)
    return parser


# ------------------------------------------------------------ manifests


def _input_spec(args) -> dict:
    if args.input is None:
        raise ValidationError("--input is required")
    path = args.input.resolve()
    if not path.exists():
        raise ValidationError(f"{path}: no such input file")
    return {
        "path": str(path),
        "sha256": mf.file_sha256(path),
        "date_col": args.date_col,
        "price_col": args.price_col,
        "input_scale": args.input_scale,
        "log_transform": not args.no_log,
        "t0": args.t0,
    }


def _load_input(spec: dict) -> PriceSeries:
    return ingest(
        spec["path"],
        spec["date_col"],
        spec["price_col"],
        spec["log_transform"],
        spec["t0"],
        spec["input_scale"],
    )


def _fit_config(args, seed: int, base: FitConfig | None = None) -> FitConfig:
    if args.fit_config is not None:
        cfg = FitConfig.from_dict(json.loads(args.fit_config.read_text()))
    else:
        cfg = base or FitConfig()
    d = cfg.to_dict()
    taboo, refine = d.pop("taboo"), d.pop("refine")
    for flag, key in (("iterations", "iterations"), ("neighborhood", "neighborhood"), ("pool_size", "pool_size")):
        if getattr(args, flag) is not None:
            taboo[key] = getattr(args, flag)
    if args.max_iter is not None:
        refine["max_iter"] = args.max_iter
    for key in ("top_k", "restarts", "slaving", "objective"):
        if getattr(args, key) is not None:
            d[key] = getattr(args, key)
    if args.enforce_hazard:
        d["enforce_hazard"] = True
    if args.no_m_range:
        d["enforce_m_range"] = False
    if args.no_b_negative:
        d["enforce_b_negative"] = False
    if args.no_dedupe:
        d["dedupe"] = False
    taboo["seed"] = seed
    taboo["step_scales"] = tuple(taboo["step_scales"])
    d["taboo"] = TabooConfig(**taboo)
    d["refine"] = RefineConfig(**refine)
    if d["bounds"] is not None:
        d["bounds"] = cfg.bounds
    return FitConfig(**d)


def _t1_list(args, series: PriceSeries) -> tuple[float, ...]:
    if args.t1_list and args.t1_range:
        raise ValidationError("give --t1-list or --t1-range, not both")
    if args.t1_range:
        if len(args.t1_range) != 3 or args.t1_range[2] <= 0:
            raise ValidationError("--t1-range needs START,STOP,STEP with STEP > 0")
        a, b, step = args.t1_range
        return tuple(float(x) for x in np.arange(a, b + 0.5 * step, step))
    return args.t1_list or (series.t1,)


def build_manifest(args) -> dict:
    seed = args.seed
    if args.command == "simulate":
        params = {k: getattr(args, f"p_{k}") for k in REFERENCE.to_dict()}
        config = {
            "kind": args.kind,
            "params": params,
            "n": args.n,
            "start": args.start,
            "noise": {"kind": args.noise, "relative_std": args.relative_std},
            "sde": {
                "sigma": args.sigma,
                "kappa": args.kappa,
                "dt": args.dt,
                "p0": args.p0,
                "scheme": args.scheme,
                "crashes": not args.no_crash,
            },
        }
        return mf.build("simulate", seed, args.format, config)
    if args.command == "benchmark":
        kinds = tuple(args.kinds.replace(",", " ").split())
        unknown = [k for k in kinds if k not in NOISE_KINDS]
        if unknown or not kinds:
            raise ValidationError(f"--kinds must name some of {', '.join(NOISE_KINDS)}")
        if args.realizations < 1:
            raise ValidationError("--realizations must be >= 1")
        fit_cfg = _fit_config(args, seed, BenchmarkConfig().fit)
        cfg = BenchmarkConfig(realizations=args.realizations, kinds=kinds, seed=seed, fit=fit_cfg)
        return mf.build("benchmark", seed, args.format, cfg.to_dict())

    spec = _input_spec(args)
    series = _load_input(spec)
    cfg = _fit_config(args, seed)
    if args.command == "fit":
        t1 = series.t1 if args.t1 is None else args.t1
        t2 = series.t2 if args.t2 is None else args.t2
        config = {"window": [t1, t2], "fit": cfg.to_dict(), "require_qualified": args.require_qualified}
        return mf.build("fit", seed, args.format, config, spec)
    t2 = series.t2 if args.t2 is None else args.t2
    plan = ScanPlan(_t1_list(args, series), t2, cfg)
    plan.validate(series)
    config = {"plan": plan.to_dict()}
    if args.command == "forecast":
        config["replicas"] = (
            None
            if args.replicas == 0
            else ReplicaSpec(args.replica_method, args.replicas, args.block_len, seed).to_dict()
        )
        config["qualified_only"] = not args.all_fits
        config["kde"] = {"method": args.kde, "n": args.grid_n, "lo": args.grid_lo, "hi": args.grid_hi}
    return mf.build(args.command, seed, args.format, config, spec)


# ------------------------------------------------------------- commands


def _summary(ens: FitEnsemble) -> dict:
    out: dict = {"fits": len(ens.fits), "flags": list(ens.flags), "failures": list(ens.failures)}
    if ens.fits:
        best = ens.best
        out["best"] = {
            "params": best.params.to_dict(),
            "rmse": best.rmse,
            "hazard_margin": best.hazard_margin,
            "qualified": best.qualification.passed,
            "failed_checks": best.qualification.failures,
        }
        out["qualified_fraction"] = ens.qualified_fraction()
        out["parameters"] = {k: v.to_dict() for k, v in summarize(ens).items()}
    return out


def _write_fits(art: Artifacts, ens: FitEnsemble) -> None:
    art.table("fits", io.ensemble_to_csv(ens, art.hash), io.ensemble_to_dict(ens))
    art.json("summary", _summary(ens))


def run_simulate(man: dict, art: Artifacts) -> int:
    c = man["config"]
    params = LpplParams.from_dict(c["params"])
    if c["kind"] == "reference":
        series = generate_reference(params, c["n"], c["start"])
    elif c["kind"] == "noisy":
        ref = generate_reference(params, c["n"], c["start"])
        series = add_noise(ref, NoiseSpec(c["noise"]["kind"], c["noise"]["relative_std"], man["seed"]))
    else:
        s = c["sde"]
        p0 = s["p0"] if s["p0"] is not None else math.exp(eval_lppl(params, c["start"]))
        sde = SdeParams(to_hazard_params(params, s["kappa"]), s["sigma"], s["kappa"], s["dt"], p0, s["scheme"])
        series = simulate_jls(sde, c["n"], man["seed"], c["start"], crashes=s["crashes"])
    art.table("series", io.series_to_csv(series, art.hash), io.series_to_dict(series))
    return EXIT_OK


def run_fit(man: dict, art: Artifacts) -> int:
    c = man["config"]
    series = _load_input(man["input"])
    window = series.window(*c["window"])
    ens = fit(window, FitConfig.from_dict(c["fit"]))
    if not ens.fits:
        raise CalibrationError("no fit retained", ens.failures)
    _write_fits(art, ens)
    art.table("curve", io.curve_to_csv(series, ens.best, art.hash), io.curve_to_dict(series, ens.best))
    if c["require_qualified"] and not any(f.qualification.passed for f in ens.fits):
        raise CalibrationError("no retained fit passes qualification", ens.failures)
    return EXIT_OK


def run_scan(man: dict, art: Artifacts) -> int:
    series = _load_input(man["input"])
    ens = scan_windows(series, ScanPlan.from_dict(man["config"]["plan"]))
    _write_fits(art, ens)
    return EXIT_OK


def run_forecast(man: dict, art: Artifacts) -> int:
    c = man["config"]
    series = _load_input(man["input"])
    reps = None if c["replicas"] is None else ReplicaSpec.from_dict(c["replicas"])
    k = c["kde"]
    fc = forecast_tc(
        series,
        ScanPlan.from_dict(c["plan"]),
        reps,
        qualified_only=c["qualified_only"],
        grid=GridSpec(k["n"], k["lo"], k["hi"]),
        method=k["method"],
    )
    art.table("fits", io.ensemble_to_csv(fc.ensemble, art.hash), io.ensemble_to_dict(fc.ensemble))
    d = fc.density
    art.table("density", io.density_to_csv(d, art.hash), io.density_to_dict(d))
    mean, std = d.moments()
    lo, hi = d.interval(0.9)
    art.json(
        "summary",
        {
            **_summary(fc.ensemble),
            "pooled": fc.pooled,
            "t_c": {"samples": d.summary.to_dict(), "density_mean": mean, "density_std": std, "interval90": [lo, hi]},
        },
    )
    return EXIT_OK


def run_bench(man: dict, art: Artifacts, checkpoint: Path | None, workers: int) -> int:
    cfg = BenchmarkConfig.from_dict(man["config"])
    report, densities = run_benchmark(cfg, checkpoint=checkpoint, tag=art.hash, workers=workers)
    art.json("report", report)
    if art.fmt == "csv":
        for (kind, name), d in densities.items():
            art.text(f"density_{kind}_{name}.csv", io.density_to_csv(d, art.hash))
    else:
        art.json("densities", {f"{kind}/{name}": io.density_to_dict(d) for (kind, name), d in densities.items()})
    for kind, rep in report["kinds"].items():
        st = rep["stats"]
        verdict = "PASS" if rep["passed"] else "FAIL"
        print(
            f"{verdict} {kind}: t_c {st['t_c']['mean']:.2f} ({st['t_c']['std']:.2f}), "
            f"m {st['m']['mean']:.3f} ({st['m']['std']:.3f}), "
            f"omega {st['omega']['mean']:.2f} ({st['omega']['std']:.2f}), "
            f"{rep['parameter_sets']} parameter sets" + (" [reduced run]" if report["reduced_run"] else "")
        )
    return EXIT_OK


def execute(man: dict, out: Path, *, checkpoint: Path | None = None, workers: int = 1) -> Artifacts:
    """Run a manifest into ``out``; raises on failure."""
    mf.check_input(man)
    art = Artifacts(out, man)
    cmd = man["command"]
    if cmd == "simulate":
        run_simulate(man, art)
    elif cmd == "fit":
        run_fit(man, art)
    elif cmd == "scan":
        run_scan(man, art)
    elif cmd == "forecast":
        run_forecast(man, art)
    elif cmd == "benchmark":
        run_bench(man, art, checkpoint, workers)
    else:
        raise ValidationError(f"unknown command {cmd!r} in manifest")
    return art


def _output_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    out = _output_dir(args)
    try:
        if args.manifest is not None:
            man = mf.load(args.manifest)
            if man["command"] != args.command:
                raise ValidationError(f"manifest is for {man['command']!r}, not {args.command!r}")
        else:
            man = build_manifest(args)
        checkpoint = None
        if args.command == "benchmark" and not args.no_checkpoint:
            checkpoint = args.checkpoint or out / "benchmark_checkpoint.jsonl"
            checkpoint.parent.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        art = execute(man, out, checkpoint=checkpoint, workers=getattr(args, "workers", 1))
        log.info("%s finished in %.1fs", args.command, time.perf_counter() - start)
        for path in art.written:
            print(path)
        return EXIT_OK
    except CalibrationError as exc:
        print(f"lppl: calibration failed: {exc.args[0]}", file=sys.stderr)
        for line in exc.args[1] if len(exc.args) > 1 else ():
            print(f"  {line}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (LpplError, ValueError) as exc:
        print(f"lppl: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        where = f"{exc.filename}: " if exc.filename else ""
        print(f"lppl: {where}{exc.strerror or exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
