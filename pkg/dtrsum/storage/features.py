"""
DTRF frame-feature files.

layout (little endian): magic "DTRF", u16 version, u8 dtype code, u8
reserved, u32 T, u32 D, then T*D row-major floats. dtype code 0 stores
32-bit floats, 1 stores 64-bit floats.
"""

import logging
import struct
from pathlib import Path

import numpy as np

from dtrsum.core.errors import (
    BadMagicError,
    FeatureFormatError,
    ShapeError,
    StorageError,
    TruncatedPayloadError,
    VersionMismatchError,
)

logger = logging.getLogger(__name__)

MAGIC = b"DTRF"
VERSION = 1
HEADER = struct.Struct("<4sHBBII")
HEADER_SIZE = HEADER.size
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
MAX_EXTENT = 2**32 - 1


def encode_features(matrix: np.ndarray, dtype_code: int = 0) -> bytes:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ShapeError(f"feature matrix must be T×D, got shape {matrix.shape}")
    steps, dim = matrix.shape
    if not (1 <= steps <= MAX_EXTENT and 1 <= dim <= MAX_EXTENT):
        raise FeatureFormatError(f"feature extents ({steps}, {dim}) do not fit the header")
    if dtype_code not in DTYPES:
        raise FeatureFormatError(f"unknown dtype code {dtype_code}")
    if not np.all(np.isfinite(matrix)):
        raise ShapeError("feature matrix contains NaN/Inf")
    header = HEADER.pack(MAGIC, VERSION, dtype_code, 0, steps, dim)
    return header + np.ascontiguousarray(matrix, dtype=DTYPES[dtype_code]).tobytes()


def decode_features(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    """
    parse a DTRF blob into a float64 T×D matrix.

    raises:
        BadMagicError: if the first four bytes are not "DTRF"
        VersionMismatchError: if the version is not supported
        TruncatedPayloadError: if the payload is shorter than T*D floats
        FeatureFormatError: for other layout violations
    """

    if len(blob) < HEADER_SIZE:
        raise TruncatedPayloadError(
            f"{source}: header needs {HEADER_SIZE} bytes, file has {len(blob)}"
        )
    magic, version, dtype_code, _, steps, dim = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"{source}: expected magic {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise VersionMismatchError(f"{source}: expected version {VERSION}, found {version}")
    if dtype_code not in DTYPES:
        raise FeatureFormatError(f"{source}: unknown dtype code {dtype_code}")
    if steps < 1 or dim < 1:
        raise FeatureFormatError(f"{source}: empty feature extents ({steps}, {dim})")

    dtype = DTYPES[dtype_code]
    expected = steps * dim * dtype.itemsize
    actual = len(blob) - HEADER_SIZE
    if actual < expected:
        raise TruncatedPayloadError(
            f"{source}: payload expected {expected} bytes for {steps}×{dim}, found {actual}"
        )
    if actual > expected:
        raise FeatureFormatError(f"{source}: {actual - expected} trailing bytes after the payload")
    matrix = np.frombuffer(blob, dtype=dtype, count=steps * dim, offset=HEADER_SIZE)
    return matrix.reshape(steps, dim).astype(np.float64)


def write_features(path, matrix: np.ndarray, dtype_code: int = 0) -> None:
    path = Path(path)
    blob = encode_features(matrix, dtype_code)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(blob)
    except OSError as e:
        raise StorageError(f"cannot write features to {path}: {e}")
    logger.debug(f"wrote {matrix.shape[0]}×{matrix.shape[1]} features to {path}")


def load_features(path) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read features from {path}: {e}")
    return decode_features(blob, str(path))
