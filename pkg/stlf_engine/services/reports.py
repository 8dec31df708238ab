"""Scoring forecast files against actual loads: metrics, interval coverage and the naive baseline."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from jinja2 import Environment, StrictUndefined
from pydantic import BaseModel

from ..engine.evaluation import MetricReport, aggregate_reports, metrics, pi_coverage
from ..engine.series import LoadSeries
from ..errors import DataError
from ..settings import SEASON_HOURS

logger = logging.getLogger(__name__)

AGGREGATE_ID = "ALL"
REPORT_COLUMNS = (
    "series_id", "model", "mape", "mdape", "iqrape", "rmse", "mpe", "stdpe", "n",
    "pi_inside", "pi_below", "pi_above",
)

PathLike = Union[str, Path]

REPORT_ENV = Environment(autoescape=False, trim_blocks=True, lstrip_blocks=True, undefined=StrictUndefined)

REPORT_TEMPLATE = REPORT_ENV.from_string(
    """\
Forecast evaluation ({{ rows | length }} rows, {{ skipped }} hours without actuals skipped)

{{ "%-10s %-6s %8s %8s %8s %10s %8s %8s %6s %8s %8s %8s" | format("series", "model", "MAPE", "MdAPE", "IqrAPE", "RMSE", "MPE", "StdPE", "n", "inside%", "below%", "above%") }}
{% for r in rows %}
{{ "%-10s %-6s %8.3f %8.3f %8.3f %10.2f %8.3f %8.3f %6d" | format(r.series_id, r.model, r.metrics.mape, r.metrics.mdape, r.metrics.iqrape, r.metrics.rmse, r.metrics.mpe, r.metrics.stdpe, r.metrics.n) }}{% if r.coverage %}{{ " %8.2f %8.2f %8.2f" | format(r.coverage[0], r.coverage[1], r.coverage[2]) }}{% endif %}

{% endfor %}
"""
)


class ReportRow(BaseModel):
    series_id: str
    model: str
    metrics: MetricReport
    coverage: Optional[Tuple[float, float, float]] = None


class EvaluationReport(BaseModel):
    rows: List[ReportRow]
    skipped: int = 0

    def row(self, series_id: str, model: str = "model") -> ReportRow:
        for r in self.rows:
            if r.series_id == series_id and r.model == model:
                return r
        raise KeyError(f"{series_id}/{model}")


def _attach_actuals(frame: pd.DataFrame, data: Dict[str, LoadSeries]) -> pd.DataFrame:
    """Fill ``actual`` from the data file (and ``naive`` from one week earlier) where known."""
    actual = frame["actual"].to_numpy(dtype=np.float64, na_value=np.nan).copy()
    naive = np.full(len(frame), np.nan)
    for i, (sid, ts) in enumerate(zip(frame["series_id"], frame["timestamp"])):
        series = data.get(str(sid))
        if series is None:
            continue
        hour = series.hour_of(ts.to_pydatetime())
        if 0 <= hour < len(series):
            actual[i] = series.values[hour]
        if SEASON_HOURS <= hour < len(series) + SEASON_HOURS:
            naive[i] = series.values[hour - SEASON_HOURS]
    return frame.assign(actual=actual, naive=naive)


def evaluate_frame(frame: pd.DataFrame, data: Sequence[LoadSeries]) -> EvaluationReport:
    known_ids = {s.series_id for s in data}
    unknown = sorted(set(frame["series_id"].astype(str)) - known_ids)
    if unknown:
        raise DataError(f"forecast mentions series missing from the data: {', '.join(unknown)}")

    scored = _attach_actuals(frame, {s.series_id: s for s in data})
    skipped = int(scored["actual"].isna().sum())
    scored = scored[scored["actual"].notna()]
    if scored.empty:
        raise DataError("no forecast hour has a known actual")

    rows: List[ReportRow] = []
    model_reports: Dict[str, MetricReport] = {}
    naive_reports: Dict[str, MetricReport] = {}
    coverages: List[Tuple[float, float, float]] = []
    for sid, group in scored.groupby("series_id", sort=True):
        sid = str(sid)
        report = metrics(group["actual"], group["point"])
        coverage = pi_coverage(group["actual"], group["lower"], group["upper"])
        model_reports[sid] = report
        coverages.append(coverage)
        rows.append(ReportRow(series_id=sid, model="model", metrics=report, coverage=coverage))

        with_naive = group[group["naive"].notna()]
        if not with_naive.empty:
            naive_reports[sid] = metrics(with_naive["actual"], with_naive["naive"])
            rows.append(ReportRow(series_id=sid, model="naive", metrics=naive_reports[sid]))

    overall = tuple(float(v) for v in np.mean(np.asarray(coverages), axis=0))
    rows.append(ReportRow(series_id=AGGREGATE_ID, model="model", metrics=aggregate_reports(model_reports), coverage=overall))
    if naive_reports:
        rows.append(ReportRow(series_id=AGGREGATE_ID, model="naive", metrics=aggregate_reports(naive_reports)))
    if skipped:
        logger.info("Skipped %d forecast hours without actuals", skipped)
    return EvaluationReport(rows=rows, skipped=skipped)


def render_report(report: EvaluationReport) -> str:
    return REPORT_TEMPLATE.render(rows=report.rows, skipped=report.skipped)


def report_frame(report: EvaluationReport) -> pd.DataFrame:
    records = []
    for r in report.rows:
        inside, below, above = r.coverage if r.coverage else (np.nan, np.nan, np.nan)
        records.append(
            {
                "series_id": r.series_id,
                "model": r.model,
                **r.metrics.model_dump(),
                "pi_inside": inside,
                "pi_below": below,
                "pi_above": above,
            }
        )
    return pd.DataFrame.from_records(records, columns=list(REPORT_COLUMNS))


def write_report(report: EvaluationReport, path: PathLike) -> Tuple[Path, Path]:
    """Write the text table to ``path`` and the same numbers to a sibling ``.csv``."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_report(report), encoding="utf-8")
    csv_path = out.with_suffix(".csv") if out.suffix != ".csv" else out.with_name(out.stem + ".report.csv")
    report_frame(report).to_csv(csv_path, index=False, float_format="%.10g", na_rep="")
    return out, csv_path
