"""Binary container for echo tensors plus an optional JSON sidecar.

Layout (little-endian)::

    8 bytes   magic  b"IRSTNSR\\0"
    uint32    format version (1)
    uint32 x3 dims (N_c, Q, L)
    payload   N_c*Q*L complex values as interleaved float64 (re, im),
              C order: last index (L) varies fastest

The sidecar sits next to the tensor as ``<file>.json``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParameterError

MAGIC = b"IRSTNSR\x00"
VERSION = 1
_HEADER = struct.Struct("<8sIIII")


def write_tensor(path, t) -> Path:
    t = np.asarray(t, dtype=complex)
    if t.ndim != 3:
        raise ParameterError(f"expected a third-order tensor, got shape {t.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, *t.shape))
        fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())
    return path


def read_tensor(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ParameterError(f"{path}: file too short for a tensor header")
    magic, version, n1, n2, n3 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParameterError(f"{path}: not a tensor file (bad magic)")
    if version != VERSION:
        raise ParameterError(f"{path}: unsupported format version {version}")
    payload = data[_HEADER.size:]
    if len(payload) != n1 * n2 * n3 * 16:
        raise ParameterError(f"{path}: payload size does not match dims {(n1, n2, n3)}")
    return np.frombuffer(payload, dtype="<c16").reshape(n1, n2, n3).astype(complex)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_sidecar(path, meta: dict) -> Path:
    out = sidecar_path(path)
    out.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def read_sidecar(path) -> dict | None:
    p = sidecar_path(path)
    if not p.exists():
        return None
    return json.loads(p.read_text())
