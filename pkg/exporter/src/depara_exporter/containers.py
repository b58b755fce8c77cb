"""DEPB writing and DEPN reading, byte-compatible with the analysis toolkit.

The formats are implemented here independently so this package only
talks to the analysis side through files:

DEPB v1: ``DEPB`` magic, uint16 version (1), uint16 flags (0), uint32
meta_len (all little-endian), UTF-8 JSON meta (model_id, layer_id,
probe_id, n, d_embed, d_input, dtype "f32le", checksum = CRC-32 of the
payload), then n*d_embed embedding float32s and n*d_input attribution
float32s, row-major little-endian. JSON is compact with sorted keys so
identical bundles serialize to identical bytes.

DEPN v1: same framing with ``DEPN`` magic; meta lists the layers
(d_in, d_out, activation), payload is each layer's weight matrix
(row-major) then bias vector, float32 little-endian.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ExportError

_FIXED_HEADER = struct.Struct("<HHI")
_F32 = np.dtype("<f4")


def write_depb(path: str | Path, *, model_id: str, layer_id: str, probe_id: str,
               embeddings: np.ndarray, attributions: np.ndarray) -> int:
    """Write a bundle file; returns the payload checksum."""
    emb = np.ascontiguousarray(embeddings, dtype=_F32)
    attr = np.ascontiguousarray(attributions, dtype=_F32)
    if emb.ndim != 2 or attr.ndim != 2 or emb.shape[0] != attr.shape[0]:
        raise ExportError(f"bad bundle shapes: {emb.shape} and {attr.shape}")
    if emb.shape[0] < 2:
        raise ExportError(f"need at least 2 probe points, got {emb.shape[0]}")
    if not (np.isfinite(emb).all() and np.isfinite(attr).all()):
        raise ExportError("non-finite value in exported tensors")
    payload = emb.tobytes() + attr.tobytes()
    checksum = zlib.crc32(payload)
    meta = {
        "model_id": model_id,
        "layer_id": layer_id,
        "probe_id": probe_id,
        "n": int(emb.shape[0]),
        "d_embed": int(emb.shape[1]),
        "d_input": int(attr.shape[1]),
        "dtype": "f32le",
        "checksum": checksum,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(b"DEPB")
        handle.write(_FIXED_HEADER.pack(1, 0, len(meta_bytes)))
        handle.write(meta_bytes)
        handle.write(payload)
    return checksum


def read_depn(path: str | Path) -> list[tuple[np.ndarray, np.ndarray, str]]:
    """Parse a DEPN network file into (weight, bias, activation) triples."""
    raw = Path(path).read_bytes()
    if raw[:4] != b"DEPN":
        raise ExportError(f"{path}: not a DEPN file")
    if len(raw) < 12:
        raise ExportError(f"{path}: truncated header")
    version, _flags, meta_len = _FIXED_HEADER.unpack(raw[4:12])
    if version != 1:
        raise ExportError(f"{path}: unsupported DEPN version {version}")
    try:
        meta = json.loads(raw[12:12 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ExportError(f"{path}: bad metadata ({exc})") from exc
    payload = raw[12 + meta_len:]
    if zlib.crc32(payload) != meta.get("checksum"):
        raise ExportError(f"{path}: corrupt payload")
    layers = []
    offset = 0
    for entry in meta.get("layers", []):
        d_in, d_out = int(entry["d_in"]), int(entry["d_out"])
        weight = np.frombuffer(payload, dtype=_F32, count=d_out * d_in, offset=offset).reshape(d_out, d_in)
        offset += 4 * d_out * d_in
        bias = np.frombuffer(payload, dtype=_F32, count=d_out, offset=offset)
        offset += 4 * d_out
        layers.append((weight, bias, str(entry["activation"])))
    if not layers:
        raise ExportError(f"{path}: no layers declared")
    return layers
