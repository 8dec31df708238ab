"""Day-ahead forecast walks over held-out data and the forecast CSV format."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..engine.autodiff import Tape
from ..engine.evaluation import ForecastBundle, ensemble_combine, repair_crossing
from ..engine.network import NetSpec
from ..engine.preprocessing import postprocess
from ..engine.series import LoadSeries
from ..engine.training import Checkpoint
from ..engine.walk import INIT_HOURS, SeriesWalk
from ..errors import DataError, UsageError
from ..settings import ENSEMBLE_WORKERS, HOURS_PER_DAY, INPUT_WINDOW

logger = logging.getLogger(__name__)

FORECAST_COLUMNS = ("timestamp", "series_id", "member_count", "point", "lower", "upper", "actual")
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

PathLike = Union[str, Path]


def _walk_start(series: LoadSeries, first_hour: int, warmup_steps: int) -> int:
    """Start hour whose step ``warmup_steps + 1`` forecasts the day at ``first_hour``."""
    if first_hour % HOURS_PER_DAY:
        raise DataError(f"forecast day must start at 00:00 UTC of series {series.series_id}")
    start = first_hour - INPUT_WINDOW - HOURS_PER_DAY * warmup_steps
    if start < 0:
        # shorter warm-up when the history does not cover the full one
        start = 0
    if first_hour < start + INIT_HOURS:
        raise DataError(
            f"series {series.series_id} needs {INIT_HOURS} hours of history before "
            f"{series.timestamp(first_hour).strftime(TIMESTAMP_FORMAT)}"
        )
    return start


def forecast_member(cp: Checkpoint, series: LoadSeries, first_day: Union[date, datetime], days: int) -> List[ForecastBundle]:
    """Forecast ``days`` consecutive days, feeding each day's actuals back before the next one.

    Stops early when a day's actuals are not available for the following step.
    """
    if days < 1:
        raise UsageError("days must be >= 1")
    first_hour = series.hour_of(first_day)
    if first_hour > len(series):
        raise DataError(f"series {series.series_id} ends before the input window of {first_day}")
    start = _walk_start(series, first_hour, 7 * cp.config.warmup_weeks_test)

    tape = Tape()
    leaves = tape.leaves(cp.params)
    walk = SeriesWalk.begin(tape, series, start, leaves, NetSpec.from_config(cp.config))
    while walk.next_out_start < first_hour:
        walk.step()

    bundles: List[ForecastBundle] = []
    for _ in range(days):
        alpha, beta = walk.es.alpha.item(), walk.es.beta.item()
        result = walk.step()
        shat = result.shat_out.values
        out = result.output
        actual = walk.actuals(result)
        bundle = ForecastBundle(
            series_id=series.series_id,
            start=series.timestamp(result.out_start),
            point=postprocess(out.point.values, result.zbar, shat),
            lower=postprocess(out.lower.values, result.zbar, shat),
            upper=postprocess(out.upper.values, result.zbar, shat),
            dalpha=out.dalpha.item(),
            dbeta=out.dbeta.item(),
            alpha=alpha,
            beta=beta,
            actual=None if actual is None else actual.copy(),
        )
        bundles.append(repair_crossing(bundle))
        if actual is None:
            break
    return bundles


def forecast_ensemble(
    checkpoints: Sequence[Checkpoint],
    series: LoadSeries,
    first_day: Union[date, datetime],
    days: int,
    rule: Optional[Literal["mean", "median"]] = None,
    workers: Optional[int] = None,
) -> List[ForecastBundle]:
    """Per-day combination (in MW) of every member's forecast."""
    if not checkpoints:
        raise UsageError("at least one checkpoint is required")
    rule = rule or checkpoints[0].config.ensemble_combine

    def run(cp: Checkpoint) -> List[ForecastBundle]:
        return forecast_member(cp, series, first_day, days)

    n_workers = max(1, min(workers or ENSEMBLE_WORKERS, len(checkpoints)))
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        members = list(pool.map(run, checkpoints))

    n_days = min(len(m) for m in members)
    combined = [ensemble_combine([m[d] for m in members], rule) for d in range(n_days)]
    logger.info("[forecast] series=%s days=%d members=%d", series.series_id, n_days, len(checkpoints))
    return combined


def bundles_to_frame(bundles: Sequence[ForecastBundle]) -> pd.DataFrame:
    frames = []
    for b in bundles:
        stamps = pd.date_range(b.start, periods=len(b.point), freq="h")
        actual = b.actual if b.actual is not None else np.full(len(b.point), np.nan)
        frames.append(
            pd.DataFrame(
                {
                    "timestamp": stamps.strftime(TIMESTAMP_FORMAT),
                    "series_id": b.series_id,
                    "member_count": b.members,
                    "point": b.point,
                    "lower": b.lower,
                    "upper": b.upper,
                    "actual": actual,
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=list(FORECAST_COLUMNS))
    return pd.concat(frames, ignore_index=True)


def bundles_to_rows(bundles: Sequence[ForecastBundle]) -> List[Dict[str, object]]:
    rows: List[Dict[str, object]] = []
    for record in bundles_to_frame(bundles).to_dict(orient="records"):
        actual = record["actual"]
        rows.append(
            {
                "timestamp": record["timestamp"],
                "point": float(record["point"]),
                "lower": float(record["lower"]),
                "upper": float(record["upper"]),
                "actual": None if pd.isna(actual) else float(actual),
            }
        )
    return rows


def write_forecast_csv(bundles: Sequence[ForecastBundle], path: PathLike, append: bool = False) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame = bundles_to_frame(bundles)
    write_header = not (append and out.exists())
    frame.to_csv(out, index=False, columns=list(FORECAST_COLUMNS), float_format="%.17g",
                 mode="a" if append else "w", header=write_header, na_rep="")
    return out


def read_forecast_csv(path: PathLike) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"series_id": str}, float_precision="round_trip")
    except FileNotFoundError as exc:
        raise DataError(f"forecast file not found: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read forecast file {path}: {exc}") from exc
    missing = [c for c in FORECAST_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing forecast columns {', '.join(missing)}")
    frame["timestamp"] = pd.to_datetime(frame["timestamp"], utc=True, errors="coerce", format="ISO8601")
    if frame["timestamp"].isna().any():
        row = int(np.flatnonzero(frame["timestamp"].isna().to_numpy())[0])
        raise DataError(f"{path}: unparseable timestamp at line {row + 2}")
    return frame
