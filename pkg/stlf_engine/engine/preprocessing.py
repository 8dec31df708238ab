"""Pattern windows, squashing and input assembly for the recurrent network."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import EsStateError, ShapeError, WindowError
from ..settings import CALENDAR_SLOTS, HOURS_PER_DAY, INPUT_WINDOW, OUTPUT_WINDOW, RAW_INPUT_SIZE
from .autodiff import Tape, Tensor


@dataclass(frozen=True)
class CalendarFeatures:
    dow: np.ndarray
    dom: np.ndarray
    woy: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.dow, self.dom, self.woy])

    def hot_indices(self) -> Tuple[int, int, int]:
        return int(self.dow.argmax()), 7 + int(self.dom.argmax()), 38 + int(self.woy.argmax())


@dataclass
class PatternPair:
    t: int
    in_idx: np.ndarray
    out_idx: np.ndarray
    x_in: Tensor
    zbar: float
    x_out: Optional[np.ndarray] = None


def make_windows(t: int, series_length: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """1-based input/output hour indices of recursive step ``t``."""
    if t < 1:
        raise WindowError(f"step index must be >= 1, got {t}")
    first = HOURS_PER_DAY * (t - 1) + 1
    in_idx = np.arange(first, first + INPUT_WINDOW)
    out_idx = np.arange(first + INPUT_WINDOW, first + INPUT_WINDOW + OUTPUT_WINDOW)
    if series_length is not None and out_idx[-1] > series_length:
        raise WindowError(f"step {t} needs hour {out_idx[-1]} but the series has {series_length}")
    return in_idx, out_idx


def squash(z: float, zbar: float, shat: float) -> float:
    if z <= 0 or zbar <= 0 or shat <= 0:
        raise EsStateError(f"squash needs positive inputs, got z={z} zbar={zbar} shat={shat}")
    return math.log(z / (zbar * shat))


def postprocess(xhat: Union[float, np.ndarray], zbar: float, shat: Union[float, np.ndarray]):
    return np.exp(xhat) * zbar * shat


def squash_window(tape: Tape, loads: np.ndarray, zbar: float, factors: Tensor) -> Tensor:
    """On-tape squashing of a whole window against the factors ES applied to it."""
    loads = np.asarray(loads, dtype=np.float64)
    if np.any(loads <= 0) or zbar <= 0:
        raise EsStateError("squash needs positive loads and level")
    return tape.log(tape.rdiv(loads / zbar, factors))


def calendar_onehots(day: Union[date, datetime]) -> CalendarFeatures:
    if isinstance(day, datetime):
        day = day.date()
    dow = np.zeros(7)
    dom = np.zeros(31)
    woy = np.zeros(52)
    dow[day.weekday()] = 1.0
    dom[day.day - 1] = 1.0
    # ISO week 53 shares the last slot
    woy[min(day.isocalendar()[1] - 1, 51)] = 1.0
    return CalendarFeatures(dow=dow, dom=dom, woy=woy)


def assemble_input(
    tape: Tape,
    x_in: Tensor,
    shat_out: Tensor,
    zbar: float,
    cal: CalendarFeatures,
) -> Tensor:
    """Raw network input ``[x_in, shat_out - 1, log10(zbar), dow, dom, woy]``."""
    cal_vec = cal.vector()
    if len(x_in) != INPUT_WINDOW or len(shat_out) != OUTPUT_WINDOW or cal_vec.shape[0] != CALENDAR_SLOTS:
        raise ShapeError("assemble_input", x_in.shape, shat_out.shape, cal_vec.shape)
    if zbar <= 0:
        raise EsStateError(f"input window mean must be positive, got {zbar}")
    raw = tape.concat([
        x_in,
        tape.shift(shat_out, -1.0),
        tape.constant([math.log10(zbar)]),
        tape.constant(cal_vec),
    ])
    assert len(raw) == RAW_INPUT_SIZE
    return raw
