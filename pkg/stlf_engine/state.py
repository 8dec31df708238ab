from __future__ import annotations

from datetime import datetime
from typing import Dict, List, Optional

from .engine.series import LoadSeries
from .engine.training import Checkpoint

# in-memory stores filled at service startup
_checkpoints: List[Checkpoint] = []  # ensemble members, in STLF_CHECKPOINTS order
_series: Dict[str, LoadSeries] = {}  # {series_id: LoadSeries}
_loaded_at: Optional[datetime] = None
