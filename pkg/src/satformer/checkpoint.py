"""Binary checkpoint format.

Layout: the 8-byte magic ``SATFCKPT``, a little-endian u64 header length,
a UTF-8 JSON header mapping each parameter name to
``{"shape", "dtype": "f32", "byte_offset"}`` (offsets relative to the start
of the payload), then the raw little-endian float32 payloads in header
order.  The reserved header key ``__metadata__`` carries configs and
training metadata.
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict

import numpy as np

MAGIC = b"SATFCKPT"
METADATA_KEY = "__metadata__"


class CheckpointError(ValueError):
    pass


def quantize(values: np.ndarray) -> np.ndarray:
    """Round-trip through float32, the precision stored on disk."""
    return np.asarray(values, dtype="<f4").astype(np.float64)


def dumps(state: "OrderedDict[str, np.ndarray]", metadata: dict | None = None) -> bytes:
    header: "OrderedDict[str, dict]" = OrderedDict()
    payload = bytearray()
    for name, value in state.items():
        if name == METADATA_KEY:
            raise CheckpointError(f"{METADATA_KEY!r} is reserved")
        arr = np.ascontiguousarray(value, dtype="<f4")
        header[name] = {"shape": list(arr.shape), "dtype": "f32", "byte_offset": len(payload)}
        payload += arr.tobytes()
    if metadata is not None:
        header[METADATA_KEY] = metadata
    head = json.dumps(header, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(head)) + head + bytes(payload)


def loads(blob: bytes) -> tuple["OrderedDict[str, np.ndarray]", dict]:
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    if len(blob) < 16:
        raise CheckpointError("truncated checkpoint header")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + hlen].decode("utf-8"), object_pairs_hook=OrderedDict)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt header: {exc}") from None
    base = 16 + hlen
    metadata = header.pop(METADATA_KEY, {})
    state: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, info in header.items():
        if info.get("dtype") != "f32":
            raise CheckpointError(f"{name}: unsupported dtype {info.get('dtype')!r}")
        shape = tuple(info["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        start = base + info["byte_offset"]
        if start + 4 * count > len(blob):
            raise CheckpointError(f"{name}: payload runs past end of file")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
        state[name] = arr.reshape(shape).astype(np.float64)
    return state, metadata


def save(path, state, metadata: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(state, metadata))


def load(path) -> tuple["OrderedDict[str, np.ndarray]", dict]:
    with open(path, "rb") as fh:
        return loads(fh.read())
