from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

import numpy as np

from ..errors import DataError
from ..settings import HOURS_PER_DAY


@dataclass
class LoadSeries:
    """Contiguous hourly loads (MW) of one series, starting on a Monday 00:00 UTC."""

    series_id: str
    start: datetime
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.start.tzinfo is None:
            self.start = self.start.replace(tzinfo=timezone.utc)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def days(self) -> int:
        return len(self) // HOURS_PER_DAY

    def timestamp(self, hour: int) -> datetime:
        return self.start + timedelta(hours=int(hour))

    def date_of(self, hour: int) -> date:
        return self.timestamp(hour).date()

    def hour_of(self, when: datetime | date) -> int:
        if not isinstance(when, datetime):
            when = datetime(when.year, when.month, when.day, tzinfo=timezone.utc)
        elif when.tzinfo is None:
            when = when.replace(tzinfo=timezone.utc)
        delta = when - self.start
        hours, rest = divmod(int(delta.total_seconds()), 3600)
        if rest:
            raise DataError(f"{when.isoformat()} is not on the hourly grid of series {self.series_id}")
        return hours
