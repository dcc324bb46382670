"""Little-endian flat binary token files.

Layout: uint32 rows, uint32 cols, then rows * cols float64 values in row-major order.
"""

import struct
from pathlib import Path

import numpy as np

from ..pyscripts.types.errors import PetGridError

_HEADER = struct.Struct("<II")
_VALUE_DTYPE = np.dtype("<f8")


def write_token_file(path: str | Path, matrix: np.ndarray) -> Path:
    """Write a 2D matrix; returns the path written."""
    data = np.ascontiguousarray(matrix, dtype=_VALUE_DTYPE)
    if data.ndim != 2:
        raise PetGridError(f"Token file needs a 2D matrix, got shape {data.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = data.shape
    path.write_bytes(_HEADER.pack(rows, cols) + data.tobytes(order="C"))
    return path


def read_token_file(path: str | Path) -> np.ndarray:
    """Read a token file written by write_token_file.

    Raises:
        PetGridError: If the payload size disagrees with the header
    """
    payload = Path(path).read_bytes()
    if len(payload) < _HEADER.size:
        raise PetGridError(f"Token file {path} is shorter than its header")
    rows, cols = _HEADER.unpack_from(payload)
    expected = _HEADER.size + rows * cols * _VALUE_DTYPE.itemsize
    if len(payload) != expected:
        raise PetGridError(f"Token file {path} has {len(payload)} bytes, header implies {expected}")
    return np.frombuffer(payload, dtype=_VALUE_DTYPE, offset=_HEADER.size).reshape(rows, cols).astype(np.float64)
