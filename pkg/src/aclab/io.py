"""Artifact persistence: CSV series, JSON reports, binary field checkpoints."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ACLB"
_METRIC_ID_BYTES = 64


def write_csv(path, header, rows):
    """CSV with %.17g float formatting (byte-stable for identical inputs)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return str(path)


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def write_field_checkpoint(path, fld, metric_id: str = "") -> str:
    """Flat binary checkpoint.

    Header: magic, version u32, ndim u32, dims u32[], epsilon f64,
    z0 f64, hz f64, z_periodic u8, metric id (64 utf-8 bytes, padded).
    Payload: row-major little-endian f64.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    disc = fld.disc
    dims = fld.u.shape
    mid = metric_id or fld.metric.label
    mid_b = mid.encode("utf-8")[:_METRIC_ID_BYTES].ljust(_METRIC_ID_BYTES, b"\0")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", 1, len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(struct.pack("<ddd", fld.epsilon, float(disc.z_nodes[0]), float(disc.hz)))
        fh.write(struct.pack("<B", 1 if disc.z_periodic else 0))
        fh.write(mid_b)
        fh.write(fld.u.astype("<f8").tobytes(order="C"))
    return str(path)


def read_field_checkpoint(path):
    """Returns (u array, meta dict). Reconstruction of the metric is the
    caller's job via the metric id."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a field checkpoint")
        version, ndim = struct.unpack("<II", fh.read(8))
        dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        epsilon, z0, hz = struct.unpack("<ddd", fh.read(24))
        (z_per,) = struct.unpack("<B", fh.read(1))
        mid = fh.read(_METRIC_ID_BYTES).rstrip(b"\0").decode("utf-8")
        count = int(np.prod(dims))
        u = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(dims)
    return u, {
        "version": version,
        "epsilon": epsilon,
        "z0": z0,
        "hz": hz,
        "z_periodic": bool(z_per),
        "metric_id": mid,
    }
