"""Coupled ES + network walk over one series, one day per recursive step.

Before the first step ES is primed on 144 hours. Every step then feeds the 24 hours that
complete the input window through ES with the current coefficients, runs the network on the
window, and applies the emitted corrections to the coefficients of the next step.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Mapping, Optional

import numpy as np

from ..errors import WindowError
from ..settings import HOURS_PER_DAY, INPUT_WINDOW, OUTPUT_WINDOW, SEASON_HOURS
from .autodiff import Tape, Tensor
from .holt_winters import EsState, init_state, seasonal_forecast, update_coeffs, update_hourly
from .network import ES_ALPHA_LOGIT, ES_BETA_LOGIT, NetOutput, NetParams, NetSpec, NetState, forward_step
from .preprocessing import PatternPair, assemble_input, calendar_onehots, make_windows, squash_window
from .series import LoadSeries

PRIMING_HOURS = INPUT_WINDOW - HOURS_PER_DAY
INIT_HOURS = 2 * SEASON_HOURS


def hours_needed(steps: int) -> int:
    """Hours from the walk start through the output window of step ``steps``."""
    return max(INIT_HOURS, HOURS_PER_DAY * (steps - 1) + INPUT_WINDOW + OUTPUT_WINDOW)


@dataclass
class StepResult:
    step: int
    out_start: int
    zbar: float
    shat_out: Tensor
    output: NetOutput
    alpha_next: float
    beta_next: float
    attention: Optional[np.ndarray] = None
    pattern: Optional[PatternPair] = None


@dataclass
class SeriesWalk:
    tape: Tape
    series: LoadSeries
    start_hour: int
    params: NetParams
    es: EsState
    net: NetState
    step_index: int = 0
    applied: Deque[Tensor] = field(default_factory=lambda: deque(maxlen=INPUT_WINDOW))
    record_attention: bool = False

    @classmethod
    def begin(
        cls,
        tape: Tape,
        series: LoadSeries,
        start_hour: int,
        leaves: Mapping[str, Tensor],
        spec: NetSpec,
        record_attention: bool = False,
    ) -> "SeriesWalk":
        if start_hour < 0 or start_hour % HOURS_PER_DAY:
            raise WindowError(f"walk start must be a non-negative multiple of 24, got {start_hour}")
        if start_hour + INIT_HOURS > len(series):
            raise WindowError(f"series {series.series_id} too short to start a walk at hour {start_hour}")
        es = init_state(
            tape,
            series.values[start_hour:start_hour + INIT_HOURS],
            leaves[ES_ALPHA_LOGIT],
            leaves[ES_BETA_LOGIT],
            start_hour=start_hour,
        )
        walk = cls(
            tape=tape,
            series=series,
            start_hour=start_hour,
            params=NetParams.bind(spec, leaves),
            es=es,
            net=NetState.fresh(spec),
            record_attention=record_attention,
        )
        walk._feed(PRIMING_HOURS)
        return walk

    @property
    def hour_cursor(self) -> int:
        return self.es.hour_cursor

    @property
    def next_out_start(self) -> int:
        return self.hour_cursor + HOURS_PER_DAY + 1

    def _feed(self, hours: int) -> None:
        values = self.series.values
        for _ in range(hours):
            tau = self.es.hour_cursor + 1
            if tau >= len(values):
                raise WindowError(f"series {self.series.series_id} has no load for hour {tau}")
            self.applied.append(self.es.current_factor())
            update_hourly(self.tape, self.es, values[tau])

    def step(self) -> StepResult:
        tape = self.tape
        self._feed(HOURS_PER_DAY)
        self.step_index += 1

        end = self.hour_cursor + 1
        loads = self.series.values[end - INPUT_WINDOW:end]
        zbar = float(loads.mean())
        x_in = squash_window(tape, loads, zbar, tape.concat(list(self.applied)))
        shat_out = seasonal_forecast(tape, self.es, end, OUTPUT_WINDOW)
        cal = calendar_onehots(self.series.date_of(end))
        raw = assemble_input(tape, x_in, shat_out, zbar, cal)

        attention: Optional[List[np.ndarray]] = [] if self.record_attention else None
        out = NetOutput.split(tape, forward_step(tape, raw, self.params, self.net, attention_out=attention))
        update_coeffs(tape, self.es, out.dalpha, out.dbeta)

        # window indices are 1-based and relative to the walk start
        in_idx, out_idx = make_windows(self.step_index)
        z_out = self.series.values[end:end + OUTPUT_WINDOW]
        x_out = None
        if len(z_out) == OUTPUT_WINDOW:
            x_out = np.log(z_out / (zbar * shat_out.values))
        pattern = PatternPair(t=self.step_index, in_idx=in_idx, out_idx=out_idx, x_in=x_in, zbar=zbar, x_out=x_out)
        return StepResult(
            step=self.step_index,
            out_start=end,
            zbar=zbar,
            shat_out=shat_out,
            output=out,
            alpha_next=self.es.alpha.item(),
            beta_next=self.es.beta.item(),
            attention=attention[0] if attention else None,
            pattern=pattern,
        )

    def actuals(self, result: StepResult) -> Optional[np.ndarray]:
        stop = result.out_start + OUTPUT_WINDOW
        if stop > len(self.series):
            return None
        return self.series.values[result.out_start:stop]
