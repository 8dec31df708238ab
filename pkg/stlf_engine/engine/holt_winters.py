"""Multiplicative Holt-Winters with weekly seasonality and per-step coefficient corrections.

Level and seasonal factors live on the tape so gradients reach the initial logits and the
network's corrections. The seasonal buffer is a ring of 168 slots: slot ``tau % 168`` holds the
factor for the next unprocessed hour with that weekly phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from ..errors import EsStateError
from ..settings import SEASON_HOURS
from .autodiff import Tape, Tensor

Scalar = Union[Tensor, float]


@dataclass
class EsState:
    level: Tensor
    seasonal: List[Tensor]
    alpha_logit: Tensor
    beta_logit: Tensor
    alpha: Tensor
    beta: Tensor
    hour_cursor: int

    def current_factor(self) -> Tensor:
        """Seasonal factor that applies to the next hour to be processed."""
        return self.seasonal[(self.hour_cursor + 1) % SEASON_HOURS]

    def seasonal_values(self) -> np.ndarray:
        return np.array([s.item() for s in self.seasonal])


def _scalar(tape: Tape, value: Scalar) -> Tensor:
    return value if isinstance(value, Tensor) else tape.constant([float(value)])


def seasonal_profile(prefix: np.ndarray) -> np.ndarray:
    """Phase-averaged ratios to the weekly mean over all full weeks, renormalized to mean 1."""
    weeks = len(prefix) // SEASON_HOURS
    blocks = prefix[: weeks * SEASON_HOURS].reshape(weeks, SEASON_HOURS)
    ratios = blocks / blocks.mean(axis=1, keepdims=True)
    profile = ratios.mean(axis=0)
    return profile / profile.mean()


def init_state(
    tape: Tape,
    prefix: Sequence[float],
    alpha_logit: Scalar,
    beta_logit: Scalar,
    start_hour: int = 0,
) -> EsState:
    values = np.asarray(prefix, dtype=np.float64)
    if values.ndim != 1 or len(values) < 2 * SEASON_HOURS:
        raise EsStateError(f"initialization needs at least {2 * SEASON_HOURS} hourly values, got {values.size}")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise EsStateError("initialization prefix must be finite and strictly positive")

    profile = seasonal_profile(values)
    seasonal: List[Tensor] = [None] * SEASON_HOURS  # type: ignore[list-item]
    for i, factor in enumerate(profile):
        seasonal[(start_hour + i) % SEASON_HOURS] = tape.constant([factor])

    a_logit = _scalar(tape, alpha_logit)
    b_logit = _scalar(tape, beta_logit)
    return EsState(
        level=tape.constant([values[:SEASON_HOURS].mean()]),
        seasonal=seasonal,
        alpha_logit=a_logit,
        beta_logit=b_logit,
        alpha=tape.sigmoid(a_logit),
        beta=tape.sigmoid(b_logit),
        hour_cursor=start_hour - 1,
    )


def update_coeffs(tape: Tape, state: EsState, dalpha: Scalar, dbeta: Scalar) -> EsState:
    state.alpha = tape.sigmoid(tape.add(state.alpha_logit, _scalar(tape, dalpha)))
    state.beta = tape.sigmoid(tape.add(state.beta_logit, _scalar(tape, dbeta)))
    return state


def update_hourly(tape: Tape, state: EsState, z: float) -> EsState:
    z = float(z)
    if not z > 0:
        raise EsStateError(f"hourly load must be positive, got {z} at hour {state.hour_cursor + 1}")
    tau = state.hour_cursor + 1
    slot = tau % SEASON_HOURS
    s_cur = state.seasonal[slot]
    level = tape.mix(state.alpha, tape.rdiv([z], s_cur), state.level)
    state.seasonal[slot] = tape.mix(state.beta, tape.rdiv([z], level), s_cur)
    state.level = level
    state.hour_cursor = tau
    return state


def seasonal_forecast(tape: Tape, state: EsState, from_hour: int, horizon: int = 24) -> Tensor:
    first_ok = state.hour_cursor + 1
    last_ok = state.hour_cursor + SEASON_HOURS
    if horizon <= 0 or from_hour < first_ok or from_hour + horizon - 1 > last_ok:
        raise EsStateError(
            f"hours {from_hour}..{from_hour + horizon - 1} outside buffer reach {first_ok}..{last_ok}"
        )
    return tape.concat([state.seasonal[(from_hour + k) % SEASON_HOURS] for k in range(horizon)])
