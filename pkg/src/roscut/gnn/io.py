"""Binary model files.

Layout (all integers little-endian)::

    8 bytes   magic  b"ROSGNN\\r\\n"
    uint32    format version (currently 1)
    uint32    length L of the architecture descriptor
    L bytes   descriptor: UTF-8 JSON, sorted keys, no whitespace
    ...       parameter blocks, float64 little-endian, row-major, in the
              order layer 0..L-1 and within a layer phi1, phi2, then
              gamma, beta, alpha when that layer is normalised

The file must end exactly after the last block.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ModelFormatError, ShapeError
from .model import GnnArchitecture, GnnParameters, init_parameters

MAGIC = b"ROSGNN\r\n"
VERSION = 1
_LE_F64 = np.dtype("<f8")


def model_bytes(params: GnnParameters, arch: GnnArchitecture) -> bytes:
    params.check(arch)
    desc = json.dumps(arch.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(desc)), desc]
    parts.extend(np.ascontiguousarray(a, dtype=_LE_F64).tobytes() for a in params.arrays())
    return b"".join(parts)


def save_model(params: GnnParameters, arch: GnnArchitecture, path) -> None:
    Path(path).write_bytes(model_bytes(params, arch))


def parse_model(data: bytes) -> tuple[GnnParameters, GnnArchitecture]:
    if data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    head = len(MAGIC) + 8
    if len(data) < head:
        raise ModelFormatError("truncated header")
    version, dlen = struct.unpack("<II", data[len(MAGIC):head])
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version} (expected {VERSION})")
    try:
        desc = json.loads(data[head: head + dlen].decode())
        arch = GnnArchitecture(**desc)
    except (ValueError, TypeError) as exc:
        raise ModelFormatError(f"bad architecture descriptor: {exc}") from None
    template = init_parameters(arch, 0)
    offset = head + dlen
    arrays = []
    for a in template.arrays():
        nbytes = a.size * 8
        if offset + nbytes > len(data):
            raise ModelFormatError("truncated parameter block")
        arrays.append(np.frombuffer(data, dtype=_LE_F64, count=a.size, offset=offset).astype(np.float64).reshape(a.shape))
        offset += nbytes
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes after parameter blocks")
    return template.replace(arrays), arch


def load_model(path, k: int | None = None) -> tuple[GnnParameters, GnnArchitecture]:
    """Read a model file; with ``k`` given, reject models built for another k."""
    params, arch = parse_model(Path(path).read_bytes())
    if k is not None and arch.k != k:
        raise ShapeError(f"model output_dim is {arch.k} but the solve asks for k={k}")
    return params, arch
