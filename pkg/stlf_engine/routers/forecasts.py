from __future__ import annotations

from datetime import date
from typing import Literal, Optional

from fastapi import APIRouter, HTTPException, Query

from .. import state
from ..services.forecasting import bundles_to_rows, forecast_ensemble
from ..settings import MAX_FORECAST_DAYS

router = APIRouter()


@router.get("/series")
async def list_series():
    return [
        {"series_id": sid, "start": s.start.isoformat(), "hours": len(s)}
        for sid, s in sorted(state._series.items())
    ]


@router.get("/forecast")
def forecast(
    series: str = Query(..., min_length=1),
    start: date = Query(..., description="first forecasted day, YYYY-MM-DD"),
    days: int = Query(1, ge=1, le=MAX_FORECAST_DAYS),
    combine: Optional[Literal["mean", "median"]] = None,
):
    # sync handler: the walk is CPU-bound and runs in the threadpool
    data = state._series.get(series)
    if data is None:
        raise HTTPException(status_code=404, detail=f"Unknown series: {series}")
    if not state._checkpoints:
        raise HTTPException(status_code=503, detail="No models loaded")
    bundles = forecast_ensemble(state._checkpoints, data, start, days, rule=combine, workers=1)
    return bundles_to_rows(bundles)
