"""Long-format load CSV ingestion and normalized export.

Input header: ``timestamp,series_id,load_mw``. Timestamps are ISO-8601 on the UTC hourly grid.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Union

import numpy as np
import pandas as pd

from ..errors import DataError
from ..engine.series import LoadSeries

logger = logging.getLogger(__name__)

COLUMNS = ("timestamp", "series_id", "load_mw")
MAX_GAP_HOURS = 24
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

PathLike = Union[str, Path]


def _read_frame(path: PathLike) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {path}") from exc
    except (UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {', '.join(missing)} (expected {','.join(COLUMNS)})")
    return frame[list(COLUMNS)]


def _parse_load(text: str) -> float:
    # exact for the %.17g export
    try:
        return float(text)
    except ValueError:
        return np.nan


def _parse_rows(frame: pd.DataFrame, path: PathLike) -> pd.DataFrame:
    stamps = pd.to_datetime(frame["timestamp"].str.strip(), utc=True, errors="coerce", format="ISO8601")
    loads = frame["load_mw"].str.strip().map(_parse_load).astype(np.float64)
    ids = frame["series_id"].str.strip()
    bad = stamps.isna() | loads.isna() | ~np.isfinite(loads.fillna(0.0)) | (ids == "")
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        # header is line 1
        raise DataError(f"{path}: unparseable row at line {row + 2}: {','.join(frame.iloc[row].tolist())}")
    off_grid = (stamps != stamps.dt.floor("h"))
    if off_grid.any():
        row = int(np.flatnonzero(off_grid.to_numpy())[0])
        raise DataError(f"{path}: timestamp off the hourly grid at line {row + 2}: {frame['timestamp'].iloc[row]}")
    return pd.DataFrame({"timestamp": stamps, "series_id": ids, "load_mw": loads.astype(np.float64)})


def _repair_series(series_id: str, rows: pd.DataFrame) -> LoadSeries:
    counts = rows.groupby("timestamp").size()
    duplicates = int((counts - 1).sum())
    hourly = rows.groupby("timestamp")["load_mw"].mean().sort_index()

    nonpositive = int((hourly <= 0).sum())
    if nonpositive:
        logger.warning("Series %s has %d nonpositive loads; replacing them by interpolation", series_id, nonpositive)
    hourly = hourly.where(hourly > 0)

    grid = pd.date_range(hourly.index[0], hourly.index[-1], freq="h")
    full = hourly.reindex(grid)
    missing = full.isna()
    run_id = (missing != missing.shift()).cumsum()
    gap_sizes = missing.groupby(run_id).sum()
    too_long = gap_sizes[gap_sizes > MAX_GAP_HOURS]
    if not too_long.empty:
        rid = too_long.index[0]
        gap_start = full.index[(run_id == rid).to_numpy()][0]
        raise DataError(
            f"series {series_id}: gap of {int(too_long.iloc[0])} hours from "
            f"{gap_start.strftime(TIMESTAMP_FORMAT)} exceeds {MAX_GAP_HOURS} hours"
        )
    interpolated = int(missing.sum()) - nonpositive
    full = full.interpolate(method="linear", limit_area="inside").dropna()
    if full.empty:
        raise DataError(f"series {series_id} has no positive loads")

    mondays = full.index[(full.index.dayofweek == 0) & (full.index.hour == 0)]
    if len(mondays) == 0:
        raise DataError(f"series {series_id} never reaches a Monday 00:00 UTC")
    full = full.loc[mondays[0]:]

    logger.info(
        "[ingest] series=%s repaired_nonpositive=%d interpolated=%d duplicates=%d",
        series_id,
        nonpositive,
        max(interpolated, 0),
        duplicates,
    )
    return LoadSeries(series_id=series_id, start=full.index[0].to_pydatetime(), values=full.to_numpy(dtype=np.float64))


def load_csv(path: PathLike) -> List[LoadSeries]:
    """One repaired LoadSeries per id, in order of first appearance."""
    rows = _parse_rows(_read_frame(path), path)
    if rows.empty:
        raise DataError(f"{path} has no data rows")
    out: List[LoadSeries] = []
    for series_id, group in rows.groupby("series_id", sort=False):
        out.append(_repair_series(str(series_id), group))
    return out


def series_by_id(series: Iterable[LoadSeries]) -> Dict[str, LoadSeries]:
    return {s.series_id: s for s in series}


def write_csv(series: Iterable[LoadSeries], path: PathLike) -> Path:
    frames = []
    for s in series:
        stamps = pd.date_range(s.start, periods=len(s), freq="h")
        frames.append(
            pd.DataFrame({"timestamp": stamps.strftime(TIMESTAMP_FORMAT), "series_id": s.series_id, "load_mw": s.values})
        )
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(out, index=False, columns=list(COLUMNS), float_format="%.17g")
    return out
