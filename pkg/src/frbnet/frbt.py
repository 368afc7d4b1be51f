"""FRBT: a small portable tensor container.

Layout (all little-endian)::

    b"FRBT" | u32 version=1 | u32 rank | rank x u32 dims | u8 dtype | payload

dtype 0 is float64, dtype 1 is complex128 stored as interleaved (re, im)
float64 pairs.  Payload is row-major.
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FRBT"
VERSION = 1
DTYPE_F64 = 0
DTYPE_C128 = 1


class FRBTError(ValueError):
    pass


def dumps(array):
    arr = np.asarray(array)
    if np.iscomplexobj(arr):
        tag = DTYPE_C128
        payload = np.ascontiguousarray(arr, dtype="<c16").tobytes()
    else:
        tag = DTYPE_F64
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    header += struct.pack("<B", tag)
    return header + payload


def loads(buf):
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise FRBTError("not an FRBT buffer (bad magic)")
    version, rank = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FRBTError(f"unsupported FRBT version {version}")
    off = 12
    dims = struct.unpack_from(f"<{rank}I", buf, off)
    off += 4 * rank
    (tag,) = struct.unpack_from("<B", buf, off)
    off += 1
    if tag == DTYPE_F64:
        dtype = np.dtype("<f8")
    elif tag == DTYPE_C128:
        dtype = np.dtype("<c16")
    else:
        raise FRBTError(f"unknown FRBT dtype tag {tag}")
    count = int(np.prod(dims, dtype=np.int64))
    expected = off + count * dtype.itemsize
    if len(buf) != expected:
        raise FRBTError(f"FRBT payload size mismatch: {len(buf)} bytes, expected {expected}")
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off).reshape(dims)
    return arr.astype(np.complex128 if tag else np.float64)


def save(path, array):
    Path(path).write_bytes(dumps(array))


def load(path):
    return loads(Path(path).read_bytes())
