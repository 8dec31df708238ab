"""Reverse-mode automatic differentiation over dense float64 vectors and matrices.

A ``Tape`` records every operation applied to its tensors; ``Tape.backward`` replays the
recorded backward rules in reverse order. Tapes are rebuilt for every batch walk because the
graph depends on the data (smoothing corrections of one day feed the next day's updates).

Shapes are never broadcast: elementwise operands must agree exactly. "Scalars" are tensors of
shape ``(1,)``.
"""

from __future__ import annotations

from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ShapeError

ArrayLike = Union[np.ndarray, Sequence[float], float]
BackwardRule = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    __slots__ = ("values", "grad", "node_id", "tape", "parents", "backward_rule", "name")

    def __init__(
        self,
        values: np.ndarray,
        tape: "Tape",
        node_id: int,
        parents: Tuple["Tensor", ...] = (),
        backward_rule: Optional[BackwardRule] = None,
        name: Optional[str] = None,
    ) -> None:
        self.values = values
        self.grad = np.zeros_like(values)
        self.node_id = node_id
        self.tape = tape
        self.parents = parents
        self.backward_rule = backward_rule
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError("item", self.values.shape, (1,))
        return float(self.values.reshape(-1)[0])

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(id={self.node_id}{label} shape={self.values.shape})"


def _as_array(values: ArrayLike) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.values.shape != b.values.shape:
        raise ShapeError(op, a.values.shape, b.values.shape)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so large |x| never overflows exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Tape:
    """Ordered record of operations; owns every tensor it creates."""

    def __init__(self) -> None:
        self.nodes: List[Tensor] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _record(
        self,
        values: np.ndarray,
        parents: Tuple[Tensor, ...] = (),
        backward_rule: Optional[BackwardRule] = None,
        name: Optional[str] = None,
    ) -> Tensor:
        for p in parents:
            if p.tape is not self:
                raise ValueError(f"operand {p!r} belongs to another tape")
        tensor = Tensor(values, self, len(self.nodes), parents, backward_rule, name)
        self.nodes.append(tensor)
        return tensor

    # --- leaves ---

    def leaf(self, values: ArrayLike, name: Optional[str] = None) -> Tensor:
        return self._record(_as_array(values).copy(), name=name)

    def constant(self, values: ArrayLike) -> Tensor:
        return self._record(_as_array(values))

    def leaves(self, arrays: Mapping[str, np.ndarray]) -> Dict[str, Tensor]:
        return {name: self.leaf(arr, name=name) for name, arr in arrays.items()}

    # --- linear algebra ---

    def matvec(self, w: Tensor, x: Tensor) -> Tensor:
        if w.values.ndim != 2 or x.values.ndim != 1 or w.values.shape[1] != x.values.shape[0]:
            raise ShapeError("matvec", w.values.shape, x.values.shape)
        wv, xv = w.values, x.values

        def rule(g: np.ndarray):
            return np.outer(g, xv), wv.T @ g

        return self._record(wv @ xv, (w, x), rule)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        _same_shape("add", a, b)
        return self._record(a.values + b.values, (a, b), lambda g: (g, g))

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        _same_shape("sub", a, b)
        return self._record(a.values - b.values, (a, b), lambda g: (g, -g))

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        """Hadamard product."""
        _same_shape("mul", a, b)
        av, bv = a.values, b.values
        return self._record(av * bv, (a, b), lambda g: (g * bv, g * av))

    def div(self, a: Tensor, b: Tensor) -> Tensor:
        _same_shape("div", a, b)
        av, bv = a.values, b.values
        out = av / bv
        return self._record(out, (a, b), lambda g: (g / bv, -g * out / bv))

    def rdiv(self, numerator: ArrayLike, b: Tensor) -> Tensor:
        """Constant numerator divided by a tensor."""
        num = _as_array(numerator)
        if num.shape != b.values.shape:
            raise ShapeError("rdiv", num.shape, b.values.shape)
        bv = b.values
        out = num / bv
        return self._record(out, (b,), lambda g: (-g * out / bv,))

    def scale(self, a: Tensor, k: float) -> Tensor:
        k = float(k)
        return self._record(a.values * k, (a,), lambda g: (g * k,))

    def shift(self, a: Tensor, k: float) -> Tensor:
        return self._record(a.values + float(k), (a,), lambda g: (g,))

    def mix(self, w: Tensor, a: Tensor, b: Tensor) -> Tensor:
        """Convex combination ``w*a + (1-w)*b``, elementwise."""
        _same_shape("mix", w, a)
        _same_shape("mix", a, b)
        wv, av, bv = w.values, a.values, b.values
        out = wv * av + (1.0 - wv) * bv
        return self._record(out, (w, a, b), lambda g: (g * (av - bv), g * wv, g * (1.0 - wv)))

    # --- structure ---

    def concat(self, parts: Sequence[Tensor]) -> Tensor:
        if not parts:
            raise ShapeError("concat", ())
        for p in parts:
            if p.values.ndim != 1:
                raise ShapeError("concat", *(q.values.shape for q in parts))
        sizes = [p.values.shape[0] for p in parts]
        bounds = np.cumsum([0] + sizes)

        def rule(g: np.ndarray):
            return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(sizes)))

        return self._record(np.concatenate([p.values for p in parts]), tuple(parts), rule)

    def slice(self, a: Tensor, start: int, stop: int) -> Tensor:
        n = a.values.shape[0] if a.values.ndim == 1 else -1
        if n < 0 or not (0 <= start < stop <= n):
            raise ShapeError(f"slice[{start}:{stop}]", a.values.shape)

        def rule(g: np.ndarray):
            full = np.zeros_like(a.values)
            full[start:stop] = g
            return (full,)

        return self._record(a.values[start:stop].copy(), (a,), rule)

    # --- nonlinearities ---

    def sigmoid(self, a: Tensor) -> Tensor:
        out = _sigmoid(a.values)
        return self._record(out, (a,), lambda g: (g * out * (1.0 - out),))

    def tanh(self, a: Tensor) -> Tensor:
        out = np.tanh(a.values)
        return self._record(out, (a,), lambda g: (g * (1.0 - out * out),))

    def exp(self, a: Tensor) -> Tensor:
        out = np.exp(a.values)
        return self._record(out, (a,), lambda g: (g * out,))

    def log(self, a: Tensor) -> Tensor:
        av = a.values
        return self._record(np.log(av), (a,), lambda g: (g / av,))

    # --- reductions ---

    def sum(self, a: Tensor) -> Tensor:
        shape = a.values.shape
        return self._record(np.array([a.values.sum()]), (a,), lambda g: (np.full(shape, g[0]),))

    def mean(self, a: Tensor) -> Tensor:
        shape = a.values.shape
        n = float(a.values.size)
        return self._record(np.array([a.values.mean()]), (a,), lambda g: (np.full(shape, g[0] / n),))

    def pinball(self, target: ArrayLike, pred: Tensor, q: float) -> Tensor:
        """Elementwise pinball loss of ``pred`` against constant ``target``.

        At ``target == pred`` the q-side branch is used, so the subgradient there is ``-q``.
        """
        z = _as_array(target)
        if z.shape != pred.values.shape:
            raise ShapeError("pinball", z.shape, pred.values.shape)
        diff = z - pred.values
        upper = diff >= 0
        out = np.where(upper, diff * q, diff * (q - 1.0))
        dpred = np.where(upper, -q, 1.0 - q)
        return self._record(out, (pred,), lambda g: (g * dpred,))

    # --- gradients ---

    def backward(self, root: Tensor) -> None:
        if root.tape is not self:
            raise ValueError("root does not belong to this tape")
        if root.values.size != 1:
            raise ShapeError("backward (root must be scalar)", root.values.shape)
        for node in self.nodes:
            node.grad = np.zeros_like(node.values)
        root.grad = np.ones_like(root.values)
        for node in reversed(self.nodes[: root.node_id + 1]):
            if node.backward_rule is None:
                continue
            for parent, g in zip(node.parents, node.backward_rule(node.grad)):
                if g is not None:
                    parent.grad = parent.grad + g


ScalarFn = Callable[[Tape, Union[Tensor, Dict[str, Tensor]]], Tensor]


def _evaluate(f: ScalarFn, x: Union[np.ndarray, Mapping[str, np.ndarray]]) -> float:
    tape = Tape()
    if isinstance(x, Mapping):
        return f(tape, tape.leaves(x)).item()
    return f(tape, tape.leaf(x)).item()


def grad_check(
    f: ScalarFn,
    x: Union[np.ndarray, Mapping[str, np.ndarray]],
    eps: float = 1e-6,
    *,
    denom_floor: float = 1e-12,
    sample: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Max relative error between the tape gradient and central differences.

    Error per component is ``|a - n| / max(|a| + |n|, denom_floor)``.

    ``x`` is a single array or a name -> array mapping (then ``f`` receives a dict of leaves).
    ``sample`` limits the check to that many random components per array. Points where ``f`` has
    a kink (e.g. pinball at target == prediction) are not valid inputs.
    """
    named = dict(x) if isinstance(x, Mapping) else {"x": np.asarray(x, dtype=np.float64)}
    named = {k: _as_array(v) for k, v in named.items()}

    tape = Tape()
    leaves = tape.leaves(named)
    out = f(tape, leaves if isinstance(x, Mapping) else leaves["x"])
    tape.backward(out)
    analytic = {k: leaves[k].grad for k in named}

    rng = np.random.default_rng(seed)
    worst = 0.0
    for key, arr in named.items():
        flat_idx: Iterable[int] = range(arr.size)
        if sample is not None and arr.size > sample:
            flat_idx = sorted(rng.choice(arr.size, size=sample, replace=False).tolist())
        for i in flat_idx:
            idx = np.unravel_index(i, arr.shape)
            plus = {k: v.copy() for k, v in named.items()}
            minus = {k: v.copy() for k, v in named.items()}
            plus[key][idx] += eps
            minus[key][idx] -= eps
            x_plus = plus if isinstance(x, Mapping) else plus["x"]
            x_minus = minus if isinstance(x, Mapping) else minus["x"]
            numeric = (_evaluate(f, x_plus) - _evaluate(f, x_minus)) / (2.0 * eps)
            a = float(analytic[key][idx])
            err = abs(a - numeric) / max(abs(a) + abs(numeric), denom_floor)
            if np.isnan(err):
                return float("nan")
            worst = max(worst, float(err))
    return worst
