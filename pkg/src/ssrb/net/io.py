"""SSNN model files.

Layout (little-endian):

    magic 4 bytes  b"SSNN"
    u8             format version (1)
    u32            JSON header length
    bytes          UTF-8 JSON header: config, parameter shapes, metadata,
                   CRC32 of the payload
    f32 payload    parameter tensors in declared order

Weights are stored as float32; models built with a wider dtype are
quantized on save, so the production (float32) path round-trips
bit-identically.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from ..errors import ChecksumError, FileFormatError, VersionMismatchError
from .model import NetConfig, NetModel

MAGIC = b"SSNN"
VERSION = 1


def save_model(model: NetModel, path) -> None:
    params = model.parameters()
    payload = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in params)
    header = {
        "config": model.config.to_dict(),
        "shapes": [list(p.shape) for p in params],
        "meta": model.meta,
        "crc32": zlib.crc32(payload) & 0xFFFFFFFF,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_model(path) -> NetModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 9 or raw[:4] != MAGIC:
        raise FileFormatError(f"{path}: not an SSNN model file")
    if raw[4] != VERSION:
        raise VersionMismatchError(
            f"{path}: SSNN version {raw[4]} unsupported (expected {VERSION})"
        )
    (blob_len,) = struct.unpack_from("<I", raw, 5)
    off = 9
    if len(raw) < off + blob_len:
        raise ChecksumError(f"{path}: truncated header")
    header = json.loads(raw[off : off + blob_len].decode("utf-8"))
    off += blob_len
    payload = raw[off:]
    if (zlib.crc32(payload) & 0xFFFFFFFF) != header["crc32"]:
        raise ChecksumError(f"{path}: payload CRC32 mismatch")

    config = NetConfig.from_dict(header["config"])
    model = NetModel.build(config, seed=0, dtype=np.float32)
    shapes = [tuple(s) for s in header["shapes"]]
    values = []
    pos = 0
    for shape in shapes:
        size = int(np.prod(shape)) * 4
        chunk = payload[pos : pos + size]
        if len(chunk) != size:
            raise ChecksumError(f"{path}: payload shorter than declared shapes")
        values.append(np.frombuffer(chunk, dtype="<f4").reshape(shape).copy())
        pos += size
    if pos != len(payload):
        raise ChecksumError(f"{path}: {len(payload) - pos} trailing payload bytes")
    model.load_parameters(values)
    model.meta = header.get("meta", {})
    return model
