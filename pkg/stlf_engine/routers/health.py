from __future__ import annotations

from datetime import datetime, timezone

from fastapi import APIRouter

from .. import state

router = APIRouter()


@router.get("/health")
async def health():
    loaded_at = state._loaded_at
    return {
        "ok": bool(state._checkpoints) and bool(state._series),
        "models_loaded": len(state._checkpoints),
        "series": sorted(state._series),
        "loaded_at": loaded_at.isoformat() if loaded_at else None,
        "updated_at": datetime.now(timezone.utc).isoformat(),
    }
