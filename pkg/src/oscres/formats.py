"""Binary and CSV layouts for snapshot matrices and encoded drives.

Snapshot file (all integers little-endian uint32)::

    magic  b"OSNP"
    version (=1), count, N, n_snap
    n_snap step indices
    count records, each ceil(N * n_snap / 8) bytes: the (N, n_snap) bit
    matrix in row-major order, packed 8 per byte, most significant bit first

Encoded-drive file::

    magic  b"OSEN"
    version (=1), count, n_ts, n_in
    count * n_ts * n_in little-endian float64 values, row-major
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError

SNAP_MAGIC = b"OSNP"
ENC_MAGIC = b"OSEN"
VERSION = 1


def write_snapshots(path, Y: np.ndarray, times) -> None:
    """``Y`` is (N, n_snap) or a stack (count, N, n_snap) of 0/1 values."""
    Y = np.asarray(Y)
    if Y.ndim == 2:
        Y = Y[None]
    if Y.size and not np.isin(Y, (0, 1)).all():
        raise DataFormatError("snapshot entries must be 0 or 1")
    count, N, n_snap = Y.shape
    times = np.asarray(times, dtype="<u4")
    if times.size != n_snap:
        raise DataFormatError(f"{times.size} step indices for {n_snap} snapshot columns")
    with open(path, "wb") as fh:
        fh.write(SNAP_MAGIC)
        fh.write(struct.pack("<IIII", VERSION, count, N, n_snap))
        fh.write(times.tobytes())
        for rec in Y.astype(np.uint8):
            fh.write(np.packbits(rec.reshape(-1), bitorder="big").tobytes())


def read_snapshots(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(Y, times)`` with ``Y`` shaped (count, N, n_snap)."""
    buf = Path(path).read_bytes()
    if buf[:4] != SNAP_MAGIC:
        raise DataFormatError(f"{path}: not a snapshot file")
    if len(buf) < 20:
        raise DataFormatError(f"{path}: truncated header")
    version, count, N, n_snap = struct.unpack("<IIII", buf[4:20])
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    off = 20 + 4 * n_snap
    times = np.frombuffer(buf[20:off], dtype="<u4").astype(np.int64)
    rec_bytes = (N * n_snap + 7) // 8
    if len(buf) != off + count * rec_bytes:
        raise DataFormatError(f"{path}: expected {off + count * rec_bytes} bytes, found {len(buf)}")
    body = np.frombuffer(buf[off:], dtype=np.uint8).reshape(count, rec_bytes)
    bits = np.unpackbits(body, axis=1, count=N * n_snap, bitorder="big")
    return bits.reshape(count, N, n_snap), times


def write_snapshots_csv(path, Y: np.ndarray, times) -> None:
    """Debug view of one (N, n_snap) matrix: one row per neuron, one column per step."""
    Y = np.asarray(Y)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["neuron"] + [f"t{int(t)}" for t in times])
        for i, row in enumerate(Y):
            w.writerow([i] + [int(v) for v in row])


def write_encoded(path, frames: np.ndarray) -> None:
    frames = np.asarray(frames, dtype="<f8")
    if frames.ndim == 2:
        frames = frames[None]
    count, n_ts, n_in = frames.shape
    with open(path, "wb") as fh:
        fh.write(ENC_MAGIC)
        fh.write(struct.pack("<IIII", VERSION, count, n_ts, n_in))
        fh.write(np.ascontiguousarray(frames).tobytes())


def read_encoded(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:4] != ENC_MAGIC or len(buf) < 20:
        raise DataFormatError(f"{path}: not an encoded-drive file")
    version, count, n_ts, n_in = struct.unpack("<IIII", buf[4:20])
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    expected = 20 + 8 * count * n_ts * n_in
    if len(buf) != expected:
        raise DataFormatError(f"{path}: expected {expected} bytes, found {len(buf)}")
    return np.frombuffer(buf[20:], dtype="<f8").reshape(count, n_ts, n_in).copy()


def params_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def encoded_cache_path(cache_dir, split: str, params: dict) -> Path:
    return Path(cache_dir) / f"encoded-{split}-{params_hash(params)}.osen"
