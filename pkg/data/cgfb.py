"""
CGFB binary matrix format

One record is: magic "CGFB", u32 version, u64 rows, u32 dim (all
little-endian), rows*dim float32 values, then a u32 CRC32 of the payload.
Files hold one or more records back to back.
"""
import struct
import zlib
from pathlib import Path

import numpy as np

from utils.exceptions import ChecksumError, FormatError

MAGIC = b"CGFB"
VERSION = 1
HEADER = struct.Struct("<4sIQI")
TRAILER = struct.Struct("<I")


def encode_matrix(matrix) -> bytes:
    array = np.ascontiguousarray(matrix, dtype="<f4")
    if array.ndim != 2:
        raise FormatError(f"CGFB stores 2-d matrices, got shape {array.shape}")
    rows, dim = array.shape
    payload = array.tobytes()
    return HEADER.pack(MAGIC, VERSION, rows, dim) + payload + TRAILER.pack(zlib.crc32(payload))


def decode_matrix(buffer: bytes, offset: int = 0):
    """Decode one record starting at offset; returns (float32 matrix, next offset)"""
    if len(buffer) - offset < HEADER.size:
        raise FormatError("truncated CGFB header")
    magic, version, rows, dim = HEADER.unpack_from(buffer, offset)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported CGFB version {version}")

    start = offset + HEADER.size
    end = start + rows * dim * 4
    if len(buffer) < end + TRAILER.size:
        raise FormatError("truncated CGFB payload")
    payload = buffer[start:end]
    (expected,) = TRAILER.unpack_from(buffer, end)
    if zlib.crc32(payload) != expected:
        raise ChecksumError("CGFB payload checksum mismatch")

    matrix = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(rows, dim)
    return matrix, end + TRAILER.size


def write_sections(path, matrices) -> None:
    with open(path, "wb") as handle:
        for matrix in matrices:
            handle.write(encode_matrix(matrix))


def read_sections(path) -> list:
    buffer = Path(path).read_bytes()
    matrices, offset = [], 0
    while offset < len(buffer):
        matrix, offset = decode_matrix(buffer, offset)
        matrices.append(matrix)
    return matrices
