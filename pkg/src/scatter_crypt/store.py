"""Persistence: binary matrix container, image files, JSON records.

Matrix container layout (little-endian)::

    magic   4s   b"SCM1"
    version u16  1
    dtype   u16  0 = complex128
    rows    u64
    cols    u64
    payload rows*cols*16 bytes, row-major interleaved (re, im) float64
    crc32   u32  of the payload
"""
from __future__ import annotations

import base64
import hashlib
import json
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import BadChecksum, BadMagic, DimensionMismatch, IoFailure, UnsupportedVersion

MAGIC = b"SCM1"
VERSION = 1
DTYPE_COMPLEX128 = 0
_HEADER = struct.Struct("<4sHHQQ")
_CRC = struct.Struct("<I")


def save_matrix(m, path) -> None:
    a = np.asarray(getattr(m, "entries", m), dtype=np.complex128)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionMismatch("only 1-D or 2-D arrays can be stored")
    payload = np.ascontiguousarray(a, dtype="<c16").tobytes()
    blob = _HEADER.pack(MAGIC, VERSION, DTYPE_COMPLEX128, a.shape[0], a.shape[1]) + payload \
        + _CRC.pack(zlib.crc32(payload) & 0xFFFFFFFF)
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def load_matrix(path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from None
    if len(blob) < _HEADER.size:
        raise IoFailure(f"{path}: file too short for header ({len(blob)} bytes)")
    magic, version, dtype, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: container version {version}")
    if dtype != DTYPE_COMPLEX128:
        raise UnsupportedVersion(f"{path}: dtype code {dtype}")
    n = rows * cols * 16
    expected = _HEADER.size + n + _CRC.size
    if len(blob) != expected:
        raise IoFailure(f"{path}: length {len(blob)} != {expected} for {rows}x{cols}; truncated or padded")
    payload = blob[_HEADER.size:_HEADER.size + n]
    (crc,) = _CRC.unpack_from(blob, _HEADER.size + n)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise BadChecksum(f"{path}: payload checksum mismatch")
    return np.frombuffer(payload, dtype="<c16").astype(np.complex128).reshape(rows, cols)


# --- base64 arrays for JSON records -----------------------------------------

def encode_real(a) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def decode_real(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f8").astype(np.float64)


def encode_complex(a) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<c16").tobytes()).decode("ascii")


def decode_complex(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<c16").astype(np.complex128)


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj)).hexdigest()


def write_json(path, obj, mode: int | None = None) -> None:
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
        if mode is not None:
            os.chmod(p, mode)
    except OSError as exc:
        raise IoFailure(f"cannot write {p}: {exc}") from None


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise IoFailure(f"{path}: invalid JSON ({exc})") from None


# --- images -----------------------------------------------------------------

def _pgm_tokens(data: bytes):
    tokens, i = [], 0
    while len(tokens) < 4:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise IoFailure("truncated PGM header")
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1


def read_pgm(path) -> np.ndarray:
    """Binary (P5) or ASCII (P2) greymap scaled to [0, 1]."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from None
    (magic, w, h, maxval), off = _pgm_tokens(data)
    w, h, maxval = int(w), int(h), int(maxval)
    if magic == b"P5":
        dt = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[off:off + w * h * dt.itemsize]
        if len(raw) != w * h * dt.itemsize:
            raise IoFailure(f"{path}: truncated PGM payload")
        px = np.frombuffer(raw, dtype=dt)
    elif magic == b"P2":
        px = np.array(data[off:].split(), dtype=np.int64)[: w * h]
    else:
        raise IoFailure(f"{path}: not a PGM file (magic {magic!r})")
    return px.reshape(h, w).astype(np.float64) / maxval


def write_pgm(path, img) -> None:
    """8-bit P5; values are clipped to [0, 1]."""
    a = np.asarray(img, dtype=np.float64)
    px = np.rint(np.clip(a, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = px.shape
    try:
        Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + px.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def read_csv_image(path) -> np.ndarray:
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from None


def write_csv_image(path, img) -> None:
    try:
        np.savetxt(path, np.asarray(img, dtype=np.float64), delimiter=",", fmt="%.17g")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def read_image(path) -> np.ndarray:
    return read_csv_image(path) if str(path).lower().endswith(".csv") else read_pgm(path)


def write_image(path, img) -> None:
    if str(path).lower().endswith(".csv"):
        write_csv_image(path, img)
    else:
        write_pgm(path, img)
