"""Binary tensor container.

Layout (all integers little-endian)::

    b"GFST"  magic
    u16      format version
    u32      header length H, then H bytes of UTF-8 JSON (may be empty: H=0)
    u32      entry count
    entries: u16 name length, name bytes (UTF-8), u16 rank, rank x u64 extents,
             prod(extents) x f64 payload, row-major
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"GFST"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(tensors: dict[str, np.ndarray], header: dict | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    hdr = b"" if header is None else json.dumps(header, sort_keys=True).encode()
    buf.write(struct.pack("<I", len(hdr)))
    buf.write(hdr)
    buf.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        raw = name.encode()
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<H", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict | None]:
    view = memoryview(blob)
    pos = 0

    def read(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        out = view[pos:pos + n]
        pos += n
        return out

    if bytes(read(4)) != MAGIC:
        raise CheckpointError("not a GFST checkpoint (bad magic)")
    (version,) = struct.unpack("<H", read(2))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack("<I", read(4))
    header = json.loads(bytes(read(hlen)).decode()) if hlen else None
    (count,) = struct.unpack("<I", read(4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", read(2))
        name = bytes(read(nlen)).decode()
        (rank,) = struct.unpack("<H", read(2))
        shape = struct.unpack(f"<{rank}Q", read(8 * rank)) if rank else ()
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(bytes(read(8 * n)), dtype="<f8").reshape(shape).astype(np.float64)
        tensors[name] = arr
    if pos != len(view):
        raise CheckpointError("trailing bytes after last entry")
    return tensors, header


def save(path, tensors: dict[str, np.ndarray], header: dict | None = None) -> None:
    Path(path).write_bytes(dumps(tensors, header))


def load(path) -> tuple[dict[str, np.ndarray], dict | None]:
    return loads(Path(path).read_bytes())
