"""Binary parameter checkpoints with an architecture fingerprint.

Layout, all integers little-endian:

    bytes 0..3    magic "GLCK"
    bytes 4..7    format version, u32 (currently 1)
    bytes 8..39   sha256 of the architecture's canonical JSON
    bytes 40..43  parameter count, u32
    then per parameter, in saved order:
        u16   name length, followed by that many utf-8 bytes
        u8    dtype code: 0 = float32, 1 = float64
        u8    rank, followed by rank u32 dims
        raw   C-contiguous little-endian values

Save then load reproduces every array bit for bit. Loading verifies the
magic, version, and (when an expected spec is given) the fingerprint, so
a checkpoint can never be silently applied to a different architecture.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from grasplab.errors import SpecMismatch
from grasplab.nn.network import NetworkSpec, ParameterSet
from grasplab.nn.tensor import parameter

MAGIC = b"GLCK"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def spec_hash(spec: NetworkSpec) -> bytes:
    return hashlib.sha256(spec.canonical_json().encode()).digest()


def save_checkpoint(path: str, spec: NetworkSpec, params: ParameterSet) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(spec_hash(spec))
        f.write(struct.pack("<I", len(params)))
        for name, p in params.items():
            data = np.ascontiguousarray(p.data)
            code = _CODES.get(data.dtype)
            if code is None:
                raise SpecMismatch(f"unsupported parameter dtype {data.dtype}")
            encoded = name.encode()
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<BB", code, data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.astype(data.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path: str, spec: NetworkSpec | None = None) -> ParameterSet:
    """Read a checkpoint; verify the fingerprint when a spec is supplied."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise SpecMismatch(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise SpecMismatch(f"{path}: unsupported checkpoint version {version}")
    stored_hash = blob[8:40]
    if spec is not None and stored_hash != spec_hash(spec):
        raise SpecMismatch(f"{path}: checkpoint was saved for a different network")
    (count,) = struct.unpack_from("<I", blob, 40)
    off = 44
    params: ParameterSet = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off : off + name_len].decode()
        off += name_len
        code, ndim = struct.unpack_from("<BB", blob, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        dtype = _DTYPES.get(code)
        if dtype is None:
            raise SpecMismatch(f"{path}: unknown dtype code {code}")
        n_bytes = int(np.prod(shape)) * dtype.itemsize if ndim else dtype.itemsize
        n_items = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype=dtype, count=n_items, offset=off).reshape(shape)
        off += n_bytes
        params[name] = parameter(arr.astype(dtype.newbyteorder("=")).copy())
    if off != len(blob):
        raise SpecMismatch(f"{path}: trailing bytes after last parameter")
    return params
