"""Writer for the .bmt binary tensor container.

Byte layout (little-endian): magic b"BMT1", u8 dtype code (f32=1, f64=2,
c64=3), u8 rank, rank u64 dims, row-major payload. Duplicated here on
purpose: the container format is the interface between this tool and the
training pipeline.
"""

import struct

import numpy as np

_DTYPE_TO_CODE = {
    np.dtype(np.float32): 1,
    np.dtype(np.float64): 2,
    np.dtype(np.complex64): 3,
}

MAGIC = b"BMT1"


def write_tensor(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    code = _DTYPE_TO_CODE.get(arr.dtype.newbyteorder("="))
    if code is None:
        raise ValueError(f"bmt: unsupported dtype {arr.dtype}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BB", code, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())
