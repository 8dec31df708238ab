"""Accuracy metrics, interval coverage, the seasonal-naive baseline, ensembling and synthetic data."""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from ..errors import BoundsError, DataError
from ..settings import HOURS_PER_DAY, SEASON_HOURS
from .series import LoadSeries


class MetricReport(BaseModel):
    mape: float
    mdape: float
    iqrape: float
    rmse: float
    mpe: float
    stdpe: float
    n: int


@dataclass
class ForecastBundle:
    """One forecasted day of one series, in MW."""

    series_id: str
    start: datetime
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    dalpha: float = 0.0
    dbeta: float = 0.0
    alpha: float = float("nan")
    beta: float = float("nan")
    actual: Optional[np.ndarray] = None
    members: int = 1

    def __post_init__(self) -> None:
        n = len(self.point)
        if len(self.lower) != n or len(self.upper) != n:
            raise BoundsError(f"bundle for {self.series_id} has unequal horizons")


def metrics(actual: Sequence[float], forecast: Sequence[float]) -> MetricReport:
    z = np.asarray(actual, dtype=np.float64)
    zhat = np.asarray(forecast, dtype=np.float64)
    if z.shape != zhat.shape or z.ndim != 1 or z.size == 0:
        raise DataError(f"actual and forecast must be equal-length vectors, got {z.shape} and {zhat.shape}")
    if np.any(z == 0):
        raise DataError("percentage errors are undefined for zero actuals")
    pe = 100.0 * (z - zhat) / z
    ape = np.abs(pe)
    q1, q3 = np.percentile(ape, [25, 75])
    return MetricReport(
        mape=float(ape.mean()),
        mdape=float(np.median(ape)),
        iqrape=float(q3 - q1),
        rmse=float(np.sqrt(np.mean((z - zhat) ** 2))),
        mpe=float(pe.mean()),
        stdpe=float(pe.std()),
        n=int(z.size),
    )


def aggregate_reports(reports: Mapping[str, MetricReport]) -> MetricReport:
    """Average of per-series metrics; every series weighs the same."""
    if not reports:
        raise DataError("no reports to aggregate")
    values = list(reports.values())
    fields = ("mape", "mdape", "iqrape", "rmse", "mpe", "stdpe")
    return MetricReport(
        **{f: float(np.mean([getattr(r, f) for r in values])) for f in fields},
        n=sum(r.n for r in values),
    )


def pi_coverage(actual: Sequence[float], lower: Sequence[float], upper: Sequence[float]) -> Tuple[float, float, float]:
    """Percentages of actuals (inside, below, above) the interval; bounds count as inside."""
    z = np.asarray(actual, dtype=np.float64)
    lo = np.asarray(lower, dtype=np.float64)
    up = np.asarray(upper, dtype=np.float64)
    if not (z.shape == lo.shape == up.shape) or z.size == 0:
        raise BoundsError("actual, lower and upper must be equal-length vectors")
    if np.any(lo > up):
        raise BoundsError(f"{int(np.sum(lo > up))} crossed intervals; repair crossing before scoring")
    below = 100.0 * np.count_nonzero(z < lo) / z.size
    above = 100.0 * np.count_nonzero(z > up) / z.size
    return 100.0 - below - above, below, above


def naive_forecast(series: Union[LoadSeries, np.ndarray], day: int) -> np.ndarray:
    """Seasonal naive: the profile of day ``day - 7`` (days counted from the series start)."""
    values = series.values if isinstance(series, LoadSeries) else np.asarray(series, dtype=np.float64)
    begin = HOURS_PER_DAY * day - SEASON_HOURS
    if day < 7 or begin + HOURS_PER_DAY > len(values):
        raise DataError(f"no history for a naive forecast of day {day}")
    return values[begin:begin + HOURS_PER_DAY].copy()


def repair_crossing(bundle: ForecastBundle) -> ForecastBundle:
    """Sort (lower, point, upper) per hour so the interval never crosses the point forecast."""
    stacked = np.sort(np.vstack([bundle.lower, bundle.point, bundle.upper]), axis=0)
    return replace(bundle, lower=stacked[0], point=stacked[1], upper=stacked[2])


def ensemble_combine(bundles: Sequence[ForecastBundle], rule: Literal["mean", "median"] = "mean") -> ForecastBundle:
    if not bundles:
        raise DataError("ensemble needs at least one member")
    first = bundles[0]
    for b in bundles[1:]:
        if b.series_id != first.series_id or b.start != first.start or len(b.point) != len(first.point):
            raise DataError(f"misaligned ensemble members: {b.series_id}@{b.start} vs {first.series_id}@{first.start}")
    if len(bundles) == 1:
        return first
    reduce = np.mean if rule == "mean" else np.median

    def combine(attr: str) -> np.ndarray:
        return reduce(np.vstack([getattr(b, attr) for b in bundles]), axis=0)

    def combine_scalar(attr: str) -> float:
        return float(reduce([getattr(b, attr) for b in bundles]))

    return ForecastBundle(
        series_id=first.series_id,
        start=first.start,
        point=combine("point"),
        lower=combine("lower"),
        upper=combine("upper"),
        dalpha=combine_scalar("dalpha"),
        dbeta=combine_scalar("dbeta"),
        alpha=combine_scalar("alpha"),
        beta=combine_scalar("beta"),
        actual=first.actual,
        members=sum(b.members for b in bundles),
    )


def synth_generate(
    seed: int,
    days: int,
    base: float = 1000.0,
    noise: float = 0.02,
    series_id: Optional[str] = None,
    start: Optional[datetime] = None,
) -> LoadSeries:
    """Multiplicative yearly x weekly x daily load with Gaussian noise, starting on a Monday."""
    if days < 28:
        raise DataError(f"synthetic series need at least 28 days, got {days}")
    rng = np.random.default_rng(seed)
    start = start or datetime(2016, 1, 4, tzinfo=timezone.utc)
    tau = np.arange(days * HOURS_PER_DAY, dtype=np.float64)

    year_phase = rng.uniform(0.0, 2.0 * np.pi)
    yearly = 1.0 + 0.08 * np.cos(2.0 * np.pi * tau / 8766.0 + year_phase)

    phase = tau % SEASON_HOURS
    dist = np.minimum(np.abs(phase - 144.0), SEASON_HOURS - np.abs(phase - 144.0))
    weekend_dip = rng.uniform(0.08, 0.16)
    weekly = 1.0 + 0.03 * np.cos(2.0 * np.pi * tau / SEASON_HOURS) - weekend_dip * np.exp(-((dist / 30.0) ** 2))

    hour = tau % HOURS_PER_DAY
    amp = rng.uniform(0.12, 0.22)
    daily = 1.0 + amp * np.sin(2.0 * np.pi * (hour - 7.0) / 24.0) + 0.05 * np.sin(4.0 * np.pi * (hour - 3.0) / 24.0)

    shocks = rng.standard_normal(tau.size) if noise > 0 else np.zeros(tau.size)
    values = base * yearly * weekly * daily * np.maximum(1.0 + noise * shocks, 0.05)
    return LoadSeries(series_id=series_id or f"SYN{seed}", start=start, values=values)
