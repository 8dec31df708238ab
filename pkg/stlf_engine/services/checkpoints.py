"""Binary checkpoint container.

Layout: ``b"STLFCKPT"`` | uint16 LE version | uint32 LE header length | UTF-8 JSON header |
float64 LE array bytes. The header holds the flat config, seed, loss trace and an index of
``{name, shape, offset}`` entries (offset in bytes from the start of the array section).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from ..config import build_config
from ..engine.network import NetSpec
from ..engine.training import CHECKPOINT_VERSION, Checkpoint
from ..errors import (
    CheckpointFormatError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    DataError,
    UsageError,
)

MAGIC = b"STLFCKPT"
_PREFIX = struct.Struct("<8sHI")

PathLike = Union[str, Path]


def dumps(cp: Checkpoint) -> bytes:
    index: List[Dict[str, object]] = []
    chunks: List[bytes] = []
    offset = 0
    for name in sorted(cp.params):
        raw = np.ascontiguousarray(cp.params[name], dtype="<f8").tobytes()
        index.append({"name": name, "shape": list(np.shape(cp.params[name])), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "config": cp.config.to_flat(),
        "seed": int(cp.seed),
        "loss_trace": [float(v) for v in cp.loss_trace],
        "arrays": index,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, cp.version, len(header_bytes)) + header_bytes + b"".join(chunks)


def loads(blob: bytes, source: str = "<bytes>") -> Checkpoint:
    if len(blob) < _PREFIX.size:
        if MAGIC.startswith(blob[: len(MAGIC)]) and blob:
            raise CheckpointTruncatedError(f"{source}: truncated before the header")
        raise CheckpointFormatError(f"{source}: not a checkpoint (too short)")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointFormatError(f"{source}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"{source}: checkpoint version {version}, this build reads {CHECKPOINT_VERSION}")
    body = _PREFIX.size + header_len
    if len(blob) < body:
        raise CheckpointTruncatedError(f"{source}: header needs {header_len} bytes, file ends early")
    try:
        header = json.loads(blob[_PREFIX.size:body].decode("utf-8"))
        cfg = build_config(header["config"])
        arrays = header["arrays"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, UsageError) as exc:
        raise CheckpointFormatError(f"{source}: unreadable header: {exc}") from exc

    expected = NetSpec.from_config(cfg).param_shapes()
    found = {entry["name"]: tuple(entry["shape"]) for entry in arrays}
    if found != expected:
        diffs = sorted(
            f"{k}: {found.get(k)} vs {expected.get(k)}"
            for k in set(found) | set(expected)
            if found.get(k) != expected.get(k)
        )
        raise CheckpointShapeError(f"{source}: arrays do not match the stored config ({'; '.join(diffs)})")

    data = memoryview(blob)[body:]
    params: Dict[str, np.ndarray] = {}
    for entry in arrays:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        start = int(entry["offset"])
        stop = start + 8 * count
        if stop > len(data):
            raise CheckpointTruncatedError(f"{source}: array {entry['name']} runs past the end of the file")
        params[entry["name"]] = np.frombuffer(data[start:stop], dtype="<f8").astype(np.float64).reshape(shape)

    return Checkpoint(
        config=cfg,
        seed=int(header.get("seed", cfg.seed)),
        params=params,
        loss_trace=[float(v) for v in header.get("loss_trace", [])],
        version=version,
    )


def save_checkpoint(cp: Checkpoint, path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    partial = out.with_name(out.name + ".part")
    partial.write_bytes(dumps(cp))
    partial.replace(out)
    return out


def load_checkpoint(path: PathLike) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(blob, source=str(path))
