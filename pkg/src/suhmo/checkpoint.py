"""Binary checkpoint files.

Layout (all integers little-endian u32)::

    b"SUHM" | version | meta_len | meta JSON bytes |
    { name_len | name | rank | dims... | float32 payload }*

Optimizer moments live next to their parameter as ``<name>.m1`` and
``<name>.m2``.
"""
import json
import struct

import numpy as np

MAGIC = b"SUHM"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode(arrays, meta=None):
    """Serialize a name -> array mapping (sorted by name) plus JSON metadata."""
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    out = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes]
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f4")
        nb = name.encode()
        out.append(struct.pack("<I", len(nb)))
        out.append(nb)
        out.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def decode(buf):
    if buf[:4] != MAGIC:
        raise CheckpointError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointError(f"truncated checkpoint: need {n} bytes at offset {pos}, have {len(buf) - pos}")
        chunk = buf[pos : pos + n]
        pos += n
        return chunk

    version, meta_len = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta = json.loads(take(meta_len).decode())
    arrays = {}
    while pos < len(buf):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode()
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        arrays[name] = np.frombuffer(take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)
    return arrays, meta


def save(path, params, meta=None, moments=None):
    """Write ``params`` (a ParamSet) and optional Adam moments to ``path``."""
    arrays = dict(params.items())
    for name, (m1, m2) in (moments or {}).items():
        arrays[f"{name}.m1"] = m1
        arrays[f"{name}.m2"] = m2
    data = encode(arrays, meta)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load(path):
    """Return (arrays, moments, meta); moments maps name -> (m1, m2)."""
    with open(path, "rb") as fh:
        arrays, meta = decode(fh.read())
    moments = {}
    for name in [n for n in arrays if n.endswith(".m1")]:
        base = name[:-3]
        moments[base] = (arrays.pop(name), arrays.pop(base + ".m2"))
    return arrays, moments, meta
