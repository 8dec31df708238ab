"""Dilated recurrent cell and its attentive two-cell variant."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Mapping, Optional, Tuple

import numpy as np

from ..errors import ShapeError
from .autodiff import Tape, Tensor

GATES = ("f", "u", "o", "c")


@dataclass(frozen=True)
class CellSpec:
    """Geometry of one cell: input width, hidden width and the split of its raw output."""

    input_size: int
    hidden_size: int
    out_size: int
    h_size: int

    def __post_init__(self) -> None:
        if self.out_size + self.h_size > self.hidden_size:
            raise ValueError(
                f"output split {self.out_size}+{self.h_size} exceeds hidden size {self.hidden_size}"
            )

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {}
        for g in GATES:
            shapes[f"W_{g}"] = (self.hidden_size, self.input_size)
            shapes[f"V_{g}"] = (self.hidden_size, self.h_size)
            shapes[f"U_{g}"] = (self.hidden_size, self.h_size)
            shapes[f"b_{g}"] = (self.hidden_size,)
        return shapes

    def init_arrays(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        bound = 1.0 / np.sqrt(self.input_size + 2 * self.h_size)
        arrays: Dict[str, np.ndarray] = {}
        for name, shape in self.shapes().items():
            if name.startswith("b_"):
                arrays[name] = np.zeros(shape)
            else:
                arrays[name] = rng.uniform(-bound, bound, size=shape)
        return arrays


@dataclass
class CellParams:
    spec: CellSpec
    tensors: Dict[str, Tensor]

    @classmethod
    def bind(cls, spec: CellSpec, leaves: Mapping[str, Tensor], prefix: str) -> "CellParams":
        return cls(spec, {name: leaves[f"{prefix}.{name}"] for name in spec.shapes()})

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]


@dataclass
class DilatedState:
    """History of (h, c) pairs; ``h(k)``/``c(k)`` read the entry stored ``k`` steps ago."""

    h_size: int
    c_size: int
    depth: int
    history: Deque[Tuple[Tensor, Tensor]] = field(default_factory=deque)

    def __post_init__(self) -> None:
        self.history = deque(self.history, maxlen=self.depth)

    def _read(self, tape: Tape, k: int, which: int, size: int) -> Tensor:
        if k < 1 or k > self.depth:
            raise ValueError(f"delay {k} outside state depth {self.depth}")
        if len(self.history) < k:
            return tape.constant(np.zeros(size))
        return self.history[-k][which]

    def h(self, tape: Tape, k: int) -> Tensor:
        return self._read(tape, k, 0, self.h_size)

    def c(self, tape: Tape, k: int) -> Tensor:
        return self._read(tape, k, 1, self.c_size)

    def push(self, h: Tensor, c: Tensor) -> None:
        self.history.append((h, c))

    def reset(self) -> None:
        self.history.clear()

    @classmethod
    def for_spec(cls, spec: CellSpec, depth: int) -> "DilatedState":
        return cls(h_size=spec.h_size, c_size=spec.hidden_size, depth=depth)


def _gate(tape: Tape, p: CellParams, g: str, x: Tensor, h_prev: Tensor, h_delayed: Tensor) -> Tensor:
    pre = tape.add(tape.matvec(p[f"W_{g}"], x), tape.matvec(p[f"V_{g}"], h_prev))
    pre = tape.add(pre, tape.matvec(p[f"U_{g}"], h_delayed))
    return tape.add(pre, p[f"b_{g}"])


def drnn_step(
    tape: Tape,
    x: Tensor,
    st: DilatedState,
    p: CellParams,
    d: int,
) -> Tuple[Tensor, Tensor, Tensor]:
    """One dRNNCell step; returns (emitted output, new h-state, new c-state)."""
    if d < 2:
        raise ValueError(f"dilation must be >= 2, got {d}")
    if len(x) != p.spec.input_size:
        raise ShapeError("drnn_step input", x.shape, (p.spec.input_size,))
    h_prev, h_delayed = st.h(tape, 1), st.h(tape, d)
    c_prev, c_delayed = st.c(tape, 1), st.c(tape, d)

    f = tape.sigmoid(_gate(tape, p, "f", x, h_prev, h_delayed))
    u = tape.sigmoid(_gate(tape, p, "u", x, h_prev, h_delayed))
    o = tape.sigmoid(_gate(tape, p, "o", x, h_prev, h_delayed))
    candidate = tape.tanh(_gate(tape, p, "c", x, h_prev, h_delayed))

    c_new = tape.mix(u, tape.mix(f, c_prev, c_delayed), candidate)
    raw = tape.mul(o, c_new)
    spec = p.spec
    out = tape.slice(raw, 0, spec.out_size)
    h_new = tape.slice(raw, spec.out_size, spec.out_size + spec.h_size)
    st.push(h_new, c_new)
    return out, h_new, c_new


def adrnn_step(
    tape: Tape,
    x: Tensor,
    st1: DilatedState,
    st2: DilatedState,
    p1: CellParams,
    p2: CellParams,
    d: int,
    attention_out: Optional[list] = None,
) -> Tensor:
    """Attentive step: the first cell's output reweights the second cell's input by ``exp(m)``."""
    if p1.spec.out_size != len(x):
        raise ShapeError("adrnn_step attention width", (p1.spec.out_size,), x.shape)
    m, _, _ = drnn_step(tape, x, st1, p1, d)
    weights = tape.exp(m)
    if attention_out is not None:
        attention_out.append(weights.values.copy())
    y, _, _ = drnn_step(tape, tape.mul(weights, x), st2, p2, d)
    return y
