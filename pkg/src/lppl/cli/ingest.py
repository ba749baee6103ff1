from __future__ import annotations

import csv
import math
from datetime import date
from pathlib import Path

import numpy as np

from lppl.errors import ValidationError
from lppl.series import PriceSeries


class IngestError(ValidationError):
    """Malformed input file; ``problems`` lists ``(line_number, message)``."""

    def __init__(self, path: Path, problems: list[tuple[int, str]]):
        self.path = path
        self.problems = problems
        lines = "; ".join(f"line {n}: {msg}" for n, msg in problems[:20])
        more = f" (+{len(problems) - 20} more)" if len(problems) > 20 else ""
        super().__init__(f"{path}: {lines}{more}")


def ingest(
    path: str | Path,
    date_col: str = "date",
    price_col: str = "close",
    log_transform: bool = True,
    t0: float = 0.0,
    input_scale: str = "price",
) -> PriceSeries:
    """Read a ``date,price`` CSV into a series indexed by trading day.

    Rows map to consecutive indices ``t0, t0+1, ...`` whatever the calendar
    gaps. Dates must be ISO-8601 and strictly increasing; prices must be
    positive. Every malformed row is reported with its line number.
    ``input_scale="log"`` reads a column that already holds log-prices; it
    is taken as is, with no positivity check and no transform.
    """
    if input_scale not in ("price", "log"):
        raise ValidationError(f"unknown input scale {input_scale!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        # leading "#" lines are metadata (artifacts written by this package carry them)
        skipped = 0
        pos = fh.tell()
        while (line := fh.readline()).startswith("#"):
            skipped += 1
            pos = fh.tell()
        fh.seek(pos)
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (date_col, price_col) if c not in header]
        if missing:
            raise IngestError(path, [(skipped + 1, f"missing column(s) {', '.join(missing)}; header is {header}")])
        problems: list[tuple[int, str]] = []
        dates: list[date] = []
        prices: list[float] = []
        for row in reader:
            line = reader.line_num + skipped
            raw_d, raw_p = row.get(date_col), row.get(price_col)
            try:
                d = date.fromisoformat((raw_d or "").strip()[:10])
            except ValueError:
                problems.append((line, f"unparseable date {raw_d!r}"))
                continue
            try:
                p = float(raw_p)
            except (TypeError, ValueError):
                problems.append((line, f"unparseable price {raw_p!r}"))
                continue
            if not math.isfinite(p):
                problems.append((line, f"non-finite value {raw_p!r} on {d.isoformat()}"))
                continue
            if p <= 0 and input_scale == "price":
                problems.append((line, f"nonpositive price {raw_p!r} on {d.isoformat()}"))
                continue
            if dates and d <= dates[-1]:
                problems.append((line, f"date {d.isoformat()} does not follow {dates[-1].isoformat()}"))
                continue
            dates.append(d)
            prices.append(p)
    if problems:
        raise IngestError(path, problems)
    if not prices:
        raise IngestError(path, [(1, "no data rows")])
    if input_scale == "log":
        return PriceSeries(t0, prices, "log")
    values = np.log(prices) if log_transform else np.asarray(prices)
    return PriceSeries(t0, values, "log" if log_transform else "raw")
