"""Probe bundles and the DEPB v1 binary container.

A probe bundle carries, for one (model, layer) pair, the embeddings and
the vectorized attribution maps of every probe point, so graphs built
from different frameworks stay comparable at the byte level.

DEPB v1 layout (integers little-endian):

    bytes 0-3    magic ``DEPB``
    bytes 4-5    version, uint16 (currently 1)
    bytes 6-7    flags, uint16 (zero)
    bytes 8-11   meta_len, uint32
    meta_len     UTF-8 JSON object with keys model_id, layer_id,
                 probe_id, n, d_embed, d_input, dtype ("f32le"),
                 checksum (CRC-32 of the payload bytes)
    payload      n*d_embed float32 embeddings, row-major, followed by
                 n*d_input float32 attributions, row-major

The writer is a pure function of the bundle contents: identical bundles
produce byte-identical streams. File extension: ``.depb``.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import DeparaError, FormatError

BUNDLE_MAGIC = b"DEPB"
FORMAT_VERSION = 1
DTYPE_TAG = "f32le"

_F32 = np.dtype("<f4")
_FIXED_HEADER = struct.Struct("<HHI")  # version, flags, meta_len
_META_KEYS = ("model_id", "layer_id", "probe_id", "n", "d_embed", "d_input", "dtype", "checksum")


def _frozen_f32_matrix(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=_F32, order="C", copy=True)
    if arr.ndim != 2:
        raise DeparaError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ProbeBundle:
    """Embeddings and attribution maps of one model layer over a probe set.

    Rows are probe points. Arrays are stored float32 and frozen after
    construction; bundles may be shared read-only across threads.
    """

    model_id: str
    layer_id: str
    probe_id: str
    embeddings: np.ndarray
    attributions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "embeddings", _frozen_f32_matrix(self.embeddings, "embeddings"))
        object.__setattr__(self, "attributions", _frozen_f32_matrix(self.attributions, "attributions"))
        self.validate()

    def validate(self) -> None:
        if self.embeddings.shape[0] != self.attributions.shape[0]:
            raise DeparaError(
                "embeddings and attributions disagree on probe count: "
                f"{self.embeddings.shape[0]} vs {self.attributions.shape[0]}"
            )
        if self.n < 2:
            raise DeparaError(f"need at least 2 probe points, got {self.n}")
        if self.d_embed < 1 or self.d_input < 1:
            raise DeparaError("d_embed and d_input must be at least 1")
        for name, arr in (("embeddings", self.embeddings), ("attributions", self.attributions)):
            if not np.isfinite(arr).all():
                raise DeparaError(f"non-finite value in {name}")

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d_embed(self) -> int:
        return self.embeddings.shape[1]

    @property
    def d_input(self) -> int:
        return self.attributions.shape[1]

    def comparable_with(self, other: "ProbeBundle") -> bool:
        """Graphs built from the two bundles can be compared (same probe set)."""
        return self.probe_id == other.probe_id and self.n == other.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbeBundle):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.layer_id == other.layer_id
            and self.probe_id == other.probe_id
            and self.embeddings.shape == other.embeddings.shape
            and self.attributions.shape == other.attributions.shape
            and self.embeddings.tobytes() == other.embeddings.tobytes()
            and self.attributions.tobytes() == other.attributions.tobytes()
        )


def bundle_checksum(bundle: ProbeBundle) -> int:
    """CRC-32 of the payload bytes exactly as the writer emits them."""
    return zlib.crc32(bundle.attributions.tobytes(), zlib.crc32(bundle.embeddings.tobytes()))


def pack_container(magic: bytes, meta: dict, payload: bytes) -> bytes:
    """Frame a container stream: magic, version, flags, JSON meta, payload."""
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return magic + _FIXED_HEADER.pack(FORMAT_VERSION, 0, len(meta_bytes)) + meta_bytes + payload


def read_container(source: BinaryIO, magic: bytes, kind: str) -> tuple[dict, "_PayloadReader"]:
    """Parse a container header; payload bytes are pulled lazily by size."""
    got = _read_exact(source, len(magic), "magic")
    if got != magic:
        raise FormatError(f"not a {kind} file")
    version, _flags, meta_len = _FIXED_HEADER.unpack(_read_exact(source, _FIXED_HEADER.size, "header"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported {kind} version {version}")
    raw_meta = _read_exact(source, meta_len, "metadata")
    try:
        meta = json.loads(raw_meta.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad {kind} metadata: {exc}") from exc
    if not isinstance(meta, dict):
        raise FormatError(f"bad {kind} metadata: expected a JSON object")
    return meta, _PayloadReader(source)


class _PayloadReader:
    def __init__(self, source: BinaryIO):
        self._source = source

    def take(self, nbytes: int, checksum: int) -> bytes:
        payload = _read_exact(self._source, nbytes, "payload")
        if zlib.crc32(payload) != checksum:
            raise FormatError("corrupt payload")
        return payload


def _read_exact(source: BinaryIO, count: int, what: str) -> bytes:
    data = source.read(count)
    if data is None or len(data) != count:
        raise FormatError(f"unexpected end of stream while reading {what}")
    return data


def _meta_int(meta: dict, key: str) -> int:
    value = meta.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise FormatError(f"bad metadata field {key!r}: {value!r}")
    return value


def write_bundle(bundle: ProbeBundle, destination: BinaryIO) -> None:
    """Serialize a bundle to a DEPB v1 stream. Deterministic."""
    bundle.validate()
    payload = bundle.embeddings.tobytes() + bundle.attributions.tobytes()
    meta = {
        "model_id": bundle.model_id,
        "layer_id": bundle.layer_id,
        "probe_id": bundle.probe_id,
        "n": bundle.n,
        "d_embed": bundle.d_embed,
        "d_input": bundle.d_input,
        "dtype": DTYPE_TAG,
        "checksum": zlib.crc32(payload),
    }
    destination.write(pack_container(BUNDLE_MAGIC, meta, payload))


def read_bundle(source: BinaryIO) -> ProbeBundle:
    """Parse a DEPB v1 stream, verifying magic, dimensions, and checksum."""
    meta, reader = read_container(source, BUNDLE_MAGIC, "DEPB")
    for key in _META_KEYS:
        if key not in meta:
            raise FormatError(f"metadata missing {key!r}")
    if meta["dtype"] != DTYPE_TAG:
        raise FormatError(f"unsupported payload dtype {meta['dtype']!r}")
    n = _meta_int(meta, "n")
    d_embed = _meta_int(meta, "d_embed")
    d_input = _meta_int(meta, "d_input")
    payload = reader.take(4 * n * (d_embed + d_input), _meta_int(meta, "checksum"))
    embeddings = np.frombuffer(payload, dtype=_F32, count=n * d_embed).reshape(n, d_embed)
    attributions = np.frombuffer(payload, dtype=_F32, count=n * d_input, offset=4 * n * d_embed).reshape(n, d_input)
    return ProbeBundle(
        model_id=str(meta["model_id"]),
        layer_id=str(meta["layer_id"]),
        probe_id=str(meta["probe_id"]),
        embeddings=embeddings,
        attributions=attributions,
    )


def save_bundle(bundle: ProbeBundle, path: str | Path) -> None:
    with open(path, "wb") as handle:
        write_bundle(bundle, handle)


def load_bundle(path: str | Path) -> ProbeBundle:
    try:
        with open(path, "rb") as handle:
            return read_bundle(handle)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc
