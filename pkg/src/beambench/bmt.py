"""Binary tensor container (.bmt).

Layout, little-endian throughout:

    4 bytes  magic b"BMT1"
    1 byte   dtype code (f32=1, f64=2, c64=3)
    1 byte   rank
    rank*8   dims as u64
    payload  row-major array data

The format is deliberately trivial so external tools (e.g. the raw-log
converter) can read and write it without this package.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, IoError

MAGIC = b"BMT1"

_CODE_TO_DTYPE = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<c8")}
_DTYPE_TO_CODE = {
    np.dtype(np.float32): 1,
    np.dtype(np.float64): 2,
    np.dtype(np.complex64): 3,
}


def write_tensor(path, arr: np.ndarray) -> None:
    """Write one array to ``path`` in the .bmt container format."""
    arr = np.asarray(arr)
    code = _DTYPE_TO_CODE.get(arr.dtype.newbyteorder("="))
    if code is None:
        raise InvalidArgumentError(
            f"bmt: unsupported dtype {arr.dtype} (supported: f32, f64, c64)"
        )
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoError(f"bmt: cannot write {path}: {exc}") from exc


def read_tensor(path) -> np.ndarray:
    """Read one array back; raises on a malformed header or truncated payload."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"bmt: cannot read {path}: {exc}") from exc
    if len(raw) < 6 or raw[:4] != MAGIC:
        raise IoError(f"bmt: {path} is not a BMT1 file")
    code, rank = struct.unpack_from("<BB", raw, 4)
    if code not in _CODE_TO_DTYPE:
        raise IoError(f"bmt: {path} has unknown dtype code {code}")
    dims = struct.unpack_from(f"<{rank}Q", raw, 6)
    offset = 6 + 8 * rank
    dtype = _CODE_TO_DTYPE[code]
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = offset + count * dtype.itemsize
    if len(raw) != expected:
        raise IoError(
            f"bmt: {path} payload size mismatch (got {len(raw)}, expected {expected})"
        )
    arr = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    return arr.reshape(dims).astype(dtype.newbyteorder("="))
