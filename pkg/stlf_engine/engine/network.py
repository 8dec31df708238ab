"""Three-block dilated stack: calendar embedding, attentive block 1, blocks 2-3, linear head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Union

import numpy as np

from ..config import TrainConfig
from ..errors import ShapeError
from ..settings import CALENDAR_SLOTS, DILATIONS, NET_OUTPUT_SIZE, OUTPUT_WINDOW, RAW_INPUT_SIZE
from .autodiff import Tape, Tensor
from .cells import CellParams, CellSpec, DilatedState, adrnn_step, drnn_step
from .preprocessing import CalendarFeatures

# raw input minus the calendar one-hots
SERIES_INPUT_SIZE = RAW_INPUT_SIZE - CALENDAR_SLOTS

ES_ALPHA_LOGIT = "es.alpha_logit"
ES_BETA_LOGIT = "es.beta_logit"


@dataclass(frozen=True)
class NetSpec:
    state_size: int
    h_size: int
    output_size: int
    embed_size: int
    shortcuts: bool = True

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "NetSpec":
        return cls(
            state_size=cfg.state_size,
            h_size=cfg.h_size,
            output_size=cfg.output_size,
            embed_size=cfg.embed_size,
            shortcuts=cfg.shortcuts,
        )

    @property
    def input_size(self) -> int:
        return SERIES_INPUT_SIZE + self.embed_size

    def cells(self) -> Dict[str, CellSpec]:
        w, s_c, s_h, s_y = self.input_size, self.state_size, self.h_size, self.output_size
        return {
            # the attention cell must emit one weight per input component plus its h-state
            "block1.attention": CellSpec(input_size=w, hidden_size=w + s_h, out_size=w, h_size=s_h),
            "block1.cell": CellSpec(input_size=w, hidden_size=s_c, out_size=s_y, h_size=s_h),
            "block2.cell": CellSpec(input_size=s_y, hidden_size=s_c, out_size=s_y, h_size=s_h),
            "block3.cell": CellSpec(input_size=s_y, hidden_size=s_c, out_size=s_y, h_size=s_h),
        }

    def param_shapes(self) -> Dict[str, tuple]:
        shapes: Dict[str, tuple] = {
            "embedding": (self.embed_size, CALENDAR_SLOTS),
            "head.weight": (NET_OUTPUT_SIZE, self.output_size),
            "head.bias": (NET_OUTPUT_SIZE,),
            ES_ALPHA_LOGIT: (1,),
            ES_BETA_LOGIT: (1,),
        }
        for prefix, spec in self.cells().items():
            for name, shape in spec.shapes().items():
                shapes[f"{prefix}.{name}"] = shape
        return dict(sorted(shapes.items()))


def init_params(spec: NetSpec, cfg: TrainConfig, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, configured ES logits."""
    arrays: Dict[str, np.ndarray] = {}
    for prefix, cell in spec.cells().items():
        for name, arr in cell.init_arrays(rng).items():
            arrays[f"{prefix}.{name}"] = arr
    arrays["embedding"] = rng.uniform(-1.0 / np.sqrt(CALENDAR_SLOTS), 1.0 / np.sqrt(CALENDAR_SLOTS),
                                      size=(spec.embed_size, CALENDAR_SLOTS))
    bound = 1.0 / np.sqrt(spec.output_size)
    arrays["head.weight"] = rng.uniform(-bound, bound, size=(NET_OUTPUT_SIZE, spec.output_size))
    arrays["head.bias"] = np.zeros(NET_OUTPUT_SIZE)
    arrays[ES_ALPHA_LOGIT] = np.array([cfg.alpha_logit_init])
    arrays[ES_BETA_LOGIT] = np.array([cfg.beta_logit_init])
    return dict(sorted(arrays.items()))


def zero_params(spec: NetSpec, cfg: TrainConfig) -> Dict[str, np.ndarray]:
    arrays = {name: np.zeros(shape) for name, shape in spec.param_shapes().items()}
    arrays[ES_ALPHA_LOGIT] = np.array([cfg.alpha_logit_init])
    arrays[ES_BETA_LOGIT] = np.array([cfg.beta_logit_init])
    return arrays


@dataclass
class NetParams:
    spec: NetSpec
    embedding: Tensor
    attention: CellParams
    block1: CellParams
    block2: CellParams
    block3: CellParams
    head_weight: Tensor
    head_bias: Tensor

    @classmethod
    def bind(cls, spec: NetSpec, leaves: Mapping[str, Tensor]) -> "NetParams":
        cells = spec.cells()
        expected = spec.param_shapes()
        for name, shape in expected.items():
            if name not in leaves:
                raise ShapeError(f"missing parameter {name}", shape)
            if tuple(leaves[name].shape) != tuple(shape):
                raise ShapeError(f"parameter {name}", leaves[name].shape, shape)
        return cls(
            spec=spec,
            embedding=leaves["embedding"],
            attention=CellParams.bind(cells["block1.attention"], leaves, "block1.attention"),
            block1=CellParams.bind(cells["block1.cell"], leaves, "block1.cell"),
            block2=CellParams.bind(cells["block2.cell"], leaves, "block2.cell"),
            block3=CellParams.bind(cells["block3.cell"], leaves, "block3.cell"),
            head_weight=leaves["head.weight"],
            head_bias=leaves["head.bias"],
        )


@dataclass
class NetState:
    attention: DilatedState
    block1: DilatedState
    block2: DilatedState
    block3: DilatedState

    @classmethod
    def fresh(cls, spec: NetSpec) -> "NetState":
        cells = spec.cells()
        d1, d2, d3 = DILATIONS
        return cls(
            attention=DilatedState.for_spec(cells["block1.attention"], d1),
            block1=DilatedState.for_spec(cells["block1.cell"], d1),
            block2=DilatedState.for_spec(cells["block2.cell"], d2),
            block3=DilatedState.for_spec(cells["block3.cell"], d3),
        )

    def reset(self) -> None:
        for st in (self.attention, self.block1, self.block2, self.block3):
            st.reset()


@dataclass
class NetOutput:
    point: Tensor
    lower: Tensor
    upper: Tensor
    dalpha: Tensor
    dbeta: Tensor

    @classmethod
    def split(cls, tape: Tape, out: Tensor) -> "NetOutput":
        if len(out) != NET_OUTPUT_SIZE:
            raise ShapeError("network output", out.shape, (NET_OUTPUT_SIZE,))
        w = OUTPUT_WINDOW
        return cls(
            point=tape.slice(out, 0, w),
            lower=tape.slice(out, w, 2 * w),
            upper=tape.slice(out, 2 * w, 3 * w),
            dalpha=tape.slice(out, 3 * w, 3 * w + 1),
            dbeta=tape.slice(out, 3 * w + 1, 3 * w + 2),
        )


def embed_calendar(tape: Tape, cal: Union[CalendarFeatures, Tensor], embedding: Tensor) -> Tensor:
    onehots = cal if isinstance(cal, Tensor) else tape.constant(cal.vector())
    return tape.matvec(embedding, onehots)


def forward_step(
    tape: Tape,
    raw_input: Tensor,
    params: NetParams,
    state: NetState,
    attention_out: Optional[List[np.ndarray]] = None,
) -> Tensor:
    if len(raw_input) != RAW_INPUT_SIZE:
        raise ShapeError("forward_step input", raw_input.shape, (RAW_INPUT_SIZE,))
    series_part = tape.slice(raw_input, 0, SERIES_INPUT_SIZE)
    calendar_part = tape.slice(raw_input, SERIES_INPUT_SIZE, RAW_INPUT_SIZE)
    x = tape.concat([series_part, embed_calendar(tape, calendar_part, params.embedding)])

    d1, d2, d3 = DILATIONS
    y1 = adrnn_step(tape, x, state.attention, state.block1, params.attention, params.block1, d1,
                    attention_out=attention_out)
    y2, _, _ = drnn_step(tape, y1, state.block2, params.block2, d2)
    block3_in = tape.add(y2, y1) if params.spec.shortcuts else y2
    y3, _, _ = drnn_step(tape, block3_in, state.block3, params.block3, d3)
    head_in = tape.add(y3, y2) if params.spec.shortcuts else y3
    return tape.add(tape.matvec(params.head_weight, head_in), params.head_bias)


