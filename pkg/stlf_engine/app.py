from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from datetime import datetime, timezone
from typing import Optional, Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .errors import DataError, UsageError
from .routers.forecasts import router as forecasts_router
from .routers.health import router as health_router
from .services.checkpoints import load_checkpoint
from .services.ingestion import load_csv, series_by_id
from .settings import CHECKPOINT_PATHS, DATA_PATH, LOG_LEVEL, validate_service_envs
from . import state


def load_models(checkpoint_paths: Sequence[str], data_path: str) -> None:
    checkpoints = [load_checkpoint(p) for p in checkpoint_paths]
    series = series_by_id(load_csv(data_path))
    state._checkpoints = checkpoints
    state._series = series
    state._loaded_at = datetime.now(timezone.utc)
    logging.info("[serve] models=%d series=%d data=%s", len(checkpoints), len(series), data_path)


def create_app(checkpoint_paths: Optional[Sequence[str]] = None, data_path: Optional[str] = None) -> FastAPI:
    if not checkpoint_paths and not data_path:
        validate_service_envs()
    paths = list(checkpoint_paths or CHECKPOINT_PATHS)
    data = data_path or DATA_PATH
    if not paths or not data:
        raise RuntimeError("The forecast service needs checkpoints and a data file")

    logging.basicConfig(level=LOG_LEVEL)

    @asynccontextmanager
    async def app_lifespan(app: FastAPI):
        load_models(paths, data)
        try:
            yield
        finally:
            state._checkpoints = []
            state._series = {}
            state._loaded_at = None

    app = FastAPI(title="STLF forecast service", lifespan=app_lifespan)

    @app.exception_handler(StarletteHTTPException)
    async def http_exception_handler(request: Request, exc: StarletteHTTPException):
        return JSONResponse(status_code=exc.status_code, content={"detail": exc.detail})

    @app.exception_handler(RequestValidationError)
    async def validation_exception_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"detail": exc.errors()})

    @app.exception_handler(UsageError)
    async def usage_exception_handler(request: Request, exc: UsageError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(DataError)
    async def data_exception_handler(request: Request, exc: DataError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(Exception)
    async def unhandled_exception_handler(request: Request, exc: Exception):
        logging.exception("Unhandled error: %s", exc)
        return JSONResponse(status_code=500, content={"detail": "Internal server error"})

    app.include_router(health_router)
    app.include_router(forecasts_router)
    return app
