from datetime import date

import numpy as np
import pytest

from stlf_engine.engine.autodiff import Tape, grad_check
from stlf_engine.engine.network import (
    ES_ALPHA_LOGIT,
    NetOutput,
    NetParams,
    NetSpec,
    NetState,
    embed_calendar,
    forward_step,
    zero_params,
)
from stlf_engine.engine.preprocessing import assemble_input, calendar_onehots
from stlf_engine.errors import ShapeError
from stlf_engine.settings import NET_OUTPUT_SIZE, RAW_INPUT_SIZE


def raw_inputs(tape, n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        x_in = tape.constant(rng.normal(scale=0.1, size=168))
        shat = tape.constant(rng.uniform(0.8, 1.2, size=24))
        cal = calendar_onehots(date.fromordinal(date(2017, 3, 6).toordinal() + k))
        out.append(assemble_input(tape, x_in, shat, float(rng.uniform(500, 5000)), cal))
    return out


def run(spec, params, steps=3, seed=0):
    tape = Tape()
    bound = NetParams.bind(spec, tape.leaves(params))
    state = NetState.fresh(spec)
    return [forward_step(tape, raw, bound, state).values for raw in raw_inputs(tape, steps, seed)]


def test_output_width(tiny_spec, tiny_params):
    for out in run(tiny_spec, tiny_params):
        assert out.shape == (NET_OUTPUT_SIZE,)
        assert np.all(np.isfinite(out))


def test_zero_params_give_zero_output(tiny_spec, tiny_cfg):
    for out in run(tiny_spec, zero_params(tiny_spec, tiny_cfg)):
        np.testing.assert_array_equal(out, np.zeros(NET_OUTPUT_SIZE))


def test_embedding_sums_hot_columns(tiny_params):
    tape = Tape()
    emb = tape.constant(tiny_params["embedding"])
    cal = calendar_onehots(date(2018, 1, 1))
    dow, dom, woy = cal.hot_indices()
    expected = tiny_params["embedding"][:, [dow, dom, woy]].sum(axis=1)
    np.testing.assert_allclose(embed_calendar(tape, cal, emb).values, expected, rtol=1e-12)


def test_shortcuts_change_the_output(tiny_spec, tiny_params):
    plain = NetSpec(
        state_size=tiny_spec.state_size,
        h_size=tiny_spec.h_size,
        output_size=tiny_spec.output_size,
        embed_size=tiny_spec.embed_size,
        shortcuts=False,
    )
    with_shortcuts = run(tiny_spec, tiny_params)
    without = run(plain, tiny_params)
    assert not np.allclose(with_shortcuts[-1], without[-1])


def test_forward_is_deterministic(tiny_spec, tiny_params):
    first, second = run(tiny_spec, tiny_params, 4), run(tiny_spec, tiny_params, 4)
    assert all(np.array_equal(a, b) for a, b in zip(first, second))


def test_param_shapes(tiny_spec):
    shapes = tiny_spec.param_shapes()
    w = tiny_spec.input_size
    assert w == RAW_INPUT_SIZE - 90 + 3
    assert shapes["embedding"] == (3, 90)
    assert shapes["head.weight"] == (NET_OUTPUT_SIZE, 4)
    assert shapes["block1.attention.W_f"] == (w + 4, w)
    assert shapes["block1.cell.W_f"] == (8, w)
    assert shapes["block2.cell.W_u"] == (8, 4)
    assert shapes["block3.cell.U_c"] == (8, 4)
    assert shapes[ES_ALPHA_LOGIT] == (1,)
    assert list(shapes) == sorted(shapes)


def test_bind_rejects_wrong_shapes(tiny_spec, tiny_params):
    tape = Tape()
    broken = dict(tiny_params)
    broken["head.bias"] = np.zeros(NET_OUTPUT_SIZE + 1)
    with pytest.raises(ShapeError):
        NetParams.bind(tiny_spec, tape.leaves(broken))
    del broken["head.bias"]
    with pytest.raises(ShapeError):
        NetParams.bind(tiny_spec, tape.leaves(broken))


def test_forward_rejects_wrong_input(tiny_spec, tiny_params):
    tape = Tape()
    bound = NetParams.bind(tiny_spec, tape.leaves(tiny_params))
    with pytest.raises(ShapeError):
        forward_step(tape, tape.constant(np.zeros(RAW_INPUT_SIZE - 1)), bound, NetState.fresh(tiny_spec))


def test_output_split():
    tape = Tape()
    out = NetOutput.split(tape, tape.constant(np.arange(NET_OUTPUT_SIZE, dtype=float)))
    assert out.point.values[0] == 0.0 and out.lower.values[0] == 24.0 and out.upper.values[0] == 48.0
    assert out.dalpha.item() == 72.0 and out.dbeta.item() == 73.0


def test_state_reset(tiny_spec, tiny_params):
    tape = Tape()
    bound = NetParams.bind(tiny_spec, tape.leaves(tiny_params))
    state = NetState.fresh(tiny_spec)
    raws = raw_inputs(tape, 2)
    first = forward_step(tape, raws[0], bound, state).values
    forward_step(tape, raws[1], bound, state)
    state.reset()
    assert np.array_equal(forward_step(tape, raws[0], bound, state).values, first)


def test_network_gradient_check(tiny_spec, tiny_params):
    params = {k: v for k, v in tiny_params.items() if not k.startswith("es.")}
    params["head.bias"] = np.random.default_rng(3).normal(scale=0.1, size=NET_OUTPUT_SIZE)
    weights = np.random.default_rng(4).normal(size=NET_OUTPUT_SIZE)

    def f(tape, leaves):
        bound = NetParams.bind(tiny_spec, {**leaves, **tape.leaves({k: tiny_params[k] for k in tiny_params if k.startswith("es.")})})
        state = NetState.fresh(tiny_spec)
        total = None
        for raw in raw_inputs(tape, 3):
            y = tape.sum(tape.mul(tape.constant(weights), forward_step(tape, raw, bound, state)))
            total = y if total is None else tape.add(total, y)
        return total

    assert grad_check(f, params, 1e-4, sample=4, denom_floor=1e-4) < 1e-5
