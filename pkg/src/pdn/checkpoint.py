"""PDNC checkpoint format: named float32 arrays with a trailing CRC32.

    "PDNC" | version u32 | count u32 |
    per array: name_len u32, name utf-8, rank u32, dims u32 * rank, values f32 row-major |
    crc32 u32 of everything before it

All integers and floats are little-endian.
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ConfigError
from .network import NetworkConfig, NetworkParams

MAGIC = b"PDNC"
VERSION = 1


def encode_arrays(arrays: dict) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr)
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_arrays(data: bytes) -> dict:
    if len(data) < 16 or data[:4] != MAGIC:
        raise CheckpointError("not a PDNC checkpoint (bad magic)")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise CheckpointError("checkpoint CRC mismatch; file is corrupt")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos, end = 12, len(data) - 4
    arrays = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", data, pos)
            name = data[pos + 4:pos + 4 + n].decode("utf-8")
            pos += 4 + n
            (rank,) = struct.unpack_from("<I", data, pos)
            dims = struct.unpack_from(f"<{rank}I", data, pos + 4)
            pos += 4 + 4 * rank
            size = int(np.prod(dims, dtype=np.int64))
            if pos + 4 * size > end:
                raise CheckpointError(f"array {name!r} runs past the end of the file")
            arrays[name] = np.frombuffer(data, "<f4", size, pos).reshape(dims).astype(np.float64)
            pos += 4 * size
    except (struct.error, UnicodeDecodeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    if pos != end:
        raise CheckpointError("trailing bytes after the last array")
    return arrays


def save_checkpoint(params: NetworkParams, path) -> None:
    Path(path).write_bytes(encode_arrays(params.arrays()))


def load_checkpoint(path, config: NetworkConfig) -> NetworkParams:
    """Load into a freshly built parameter set for `config`; names and shapes must match."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    arrays = decode_arrays(data)
    params = NetworkParams.zeros(config)
    expected = params.arrays()
    if set(arrays) != set(expected):
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        raise ConfigError(f"checkpoint does not match config (missing {missing[:3]}, extra {extra[:3]})")
    for name, dst in expected.items():
        if arrays[name].shape != dst.shape:
            raise ConfigError(f"{name}: checkpoint shape {arrays[name].shape} != config shape {dst.shape}")
        dst[...] = arrays[name]
    params.enforce_masks()
    return params
