"""Bit-exact reader/writer for the array interchange files.

Only the subset this pipeline exchanges is supported: format version 1.0,
dtype '<f4', C order, 2-D shape.  The writer emits the canonical layout
(header space-padded to a multiple of 64 bytes, newline-terminated), so
write-then-read and read-then-write round-trip byte-identically.
"""

from __future__ import annotations

import ast
import struct
from pathlib import Path

import numpy as np

from .core import EmbeddingMatrix, normalize_rows
from .errors import BadMagic, ShapeMismatch, TruncatedPayload, UnsupportedDtype, UnsupportedOrder

MAGIC = b"\x93NUMPY"
VERSION = (1, 0)
_ALIGN = 64


def _build_header(rows: int, dim: int) -> bytes:
    body = f"{{'descr': '<f4', 'fortran_order': False, 'shape': ({rows}, {dim}), }}"
    unpadded = len(MAGIC) + 2 + 2 + len(body) + 1
    pad = (-unpadded) % _ALIGN
    text = body + " " * pad + "\n"
    return MAGIC + bytes(VERSION) + struct.pack("<H", len(text)) + text.encode("latin1")


def write_array(m: EmbeddingMatrix, path: str | Path) -> None:
    """Write a float32 matrix as a version-1.0 array file."""
    data = np.ascontiguousarray(m.data, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(_build_header(m.rows, m.dim))
        fh.write(data.tobytes(order="C"))


def _parse_header(raw: bytes, path: str) -> tuple[int, int, int]:
    """Return (rows, dim, payload_offset) for a validated v1.0 header."""
    if len(raw) < 10 or raw[:6] != MAGIC:
        raise BadMagic(f"{path}: not an array file (bad magic)")
    if (raw[6], raw[7]) != VERSION:
        raise BadMagic(f"{path}: unsupported format version {(raw[6], raw[7])}")
    (hlen,) = struct.unpack("<H", raw[8:10])
    if len(raw) < 10 + hlen:
        raise TruncatedPayload(f"{path}: header truncated")
    try:
        header = ast.literal_eval(raw[10 : 10 + hlen].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise BadMagic(f"{path}: malformed header") from exc
    descr = header.get("descr")
    if descr != "<f4":
        raise UnsupportedDtype(f"{path}: dtype {descr!r} not supported, expected '<f4'")
    if header.get("fortran_order"):
        raise UnsupportedOrder(f"{path}: fortran_order arrays are not supported")
    shape = header.get("shape")
    if not (isinstance(shape, tuple) and len(shape) == 2):
        raise ShapeMismatch(f"{path}: expected a 2-D shape, got {shape!r}")
    return int(shape[0]), int(shape[1]), 10 + hlen


def read_header(path: str | Path) -> tuple[int, int]:
    """Shape (rows, dim) from the header alone; the payload is not read."""
    with open(path, "rb") as fh:
        prefix = fh.read(10)
        if len(prefix) < 10 or prefix[:6] != MAGIC:
            raise BadMagic(f"{path}: not an array file (bad magic)")
        (hlen,) = struct.unpack("<H", prefix[8:10])
        raw = prefix + fh.read(hlen)
    rows, dim, _ = _parse_header(raw, str(path))
    return rows, dim


def read_array(path: str | Path, *, normalize: bool = False) -> EmbeddingMatrix:
    """Read a version-1.0 '<f4' C-order matrix file.

    With normalize=True every row is scaled to unit norm after loading
    (the policy used when feeding embeddings into the pipeline); the
    default keeps the stored bytes so write_array round-trips exactly.
    """
    raw = Path(path).read_bytes()
    rows, dim, offset = _parse_header(raw, str(path))
    expected = rows * dim * 4
    payload = raw[offset : offset + expected]
    if len(payload) < expected:
        raise TruncatedPayload(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, dim)
    m = EmbeddingMatrix(data)
    return normalize_rows(m) if normalize else m
