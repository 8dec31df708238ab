import struct

import numpy as np
import pytest

from stlf_engine.engine.training import Checkpoint
from stlf_engine.errors import (
    CheckpointFormatError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    DataError,
)
from stlf_engine.services.checkpoints import MAGIC, dumps, load_checkpoint, loads, save_checkpoint


@pytest.fixture
def checkpoint(tiny_cfg, tiny_params):
    return Checkpoint(config=tiny_cfg, seed=tiny_cfg.seed, params=tiny_params, loss_trace=[0.51, 0.4375, 1 / 3])


def test_round_trip_is_bitwise(checkpoint):
    back = loads(dumps(checkpoint))
    assert back.config == checkpoint.config
    assert back.seed == 7
    assert back.loss_trace == checkpoint.loss_trace
    assert back.param_hash() == checkpoint.param_hash()
    for name, arr in checkpoint.params.items():
        assert back.params[name].shape == arr.shape
        assert np.array_equal(back.params[name], arr)


def test_save_load_save_gives_identical_bytes(checkpoint, tmp_path):
    first = save_checkpoint(checkpoint, tmp_path / "a.ckpt")
    second = save_checkpoint(load_checkpoint(first), tmp_path / "nested" / "b.ckpt")
    assert first.read_bytes() == second.read_bytes()


def test_layout_prefix(checkpoint):
    blob = dumps(checkpoint)
    magic, version, header_len = struct.unpack_from("<8sHI", blob)
    assert magic == MAGIC == b"STLFCKPT"
    assert version == 1
    assert blob[14:14 + header_len].startswith(b'{"arrays":')
    floats = sum(a.size for a in checkpoint.params.values())
    assert len(blob) == 14 + header_len + 8 * floats


def test_truncated_file(checkpoint):
    blob = dumps(checkpoint)
    with pytest.raises(CheckpointTruncatedError):
        loads(blob[:-8])
    with pytest.raises(CheckpointTruncatedError):
        loads(blob[:20])
    with pytest.raises(CheckpointTruncatedError):
        loads(blob[:5])


def test_unknown_version(checkpoint):
    blob = bytearray(dumps(checkpoint))
    struct.pack_into("<H", blob, 8, 2)
    with pytest.raises(CheckpointVersionError):
        loads(bytes(blob))


def test_bad_magic_and_header(checkpoint):
    blob = dumps(checkpoint)
    with pytest.raises(CheckpointFormatError):
        loads(b"NOTACKPT" + blob[8:])
    with pytest.raises(CheckpointFormatError):
        loads(b"")
    header_len = struct.unpack_from("<I", blob, 10)[0]
    garbled = blob[:14] + b"x" * header_len + blob[14 + header_len:]
    with pytest.raises(CheckpointFormatError):
        loads(garbled)


def test_shapes_must_match_config(checkpoint):
    params = dict(checkpoint.params)
    params["head.bias"] = np.zeros(75)
    broken = Checkpoint(config=checkpoint.config, seed=7, params=params)
    with pytest.raises(CheckpointShapeError) as info:
        loads(dumps(broken))
    assert "head.bias" in str(info.value)

    missing = Checkpoint(config=checkpoint.config, seed=7, params={k: v for k, v in params.items() if k != "embedding"})
    with pytest.raises(CheckpointShapeError):
        loads(dumps(missing))


def test_missing_file_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "absent.ckpt")
