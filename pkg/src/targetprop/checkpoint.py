"""Flat binary checkpoint container.

Layout::

    b"TPCKPT\\0\\0"            8-byte magic
    uint32 LE                 format version
    uint64 LE                 length of the JSON index in bytes
    JSON index (UTF-8)        {"meta": {...}, "blocks": [{"name", "shape", "offset", "count"}]}
    float64 LE payload        blocks back to back, offsets relative to payload start
"""
import json
import struct

import numpy as np

from .errors import FormatError

MAGIC = b"TPCKPT\0\0"
VERSION = 1
_LE_F64 = np.dtype("<f8")


def save_checkpoint(path, state, meta=None):
    blocks, offset = [], 0
    for name in sorted(state):
        arr = np.asarray(state[name])
        blocks.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": int(arr.size)})
        offset += arr.size
    index = json.dumps({"meta": meta or {}, "blocks": blocks}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(index)))
        fh.write(index)
        for name in sorted(state):
            fh.write(np.ascontiguousarray(state[name], dtype=_LE_F64).tobytes())


def load_checkpoint(path):
    """Return ``(state, meta)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic at offset 0)")
    if len(buf) < 20:
        raise FormatError(f"{path}: truncated header at offset {len(buf)}")
    version, n_index = struct.unpack("<IQ", buf[8:20])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version} at offset 8")
    try:
        index = json.loads(buf[20 : 20 + n_index].decode())
    except ValueError:
        raise FormatError(f"{path}: corrupt index at offset 20") from None
    if (len(buf) - 20 - n_index) % 8:
        raise FormatError(f"{path}: payload length is not a multiple of 8 at offset {20 + n_index}")
    payload = np.frombuffer(buf, dtype=_LE_F64, offset=20 + n_index)
    state = {}
    for block in index["blocks"]:
        start, count = block["offset"], block["count"]
        if start + count > payload.size:
            raise FormatError(f"{path}: block {block['name']} runs past end of file")
        state[block["name"]] = payload[start : start + count].reshape(block["shape"]).astype(np.float64)
    return state, index["meta"]
