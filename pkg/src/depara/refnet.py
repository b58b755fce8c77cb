"""Small dense feed-forward networks with exact reverse-mode gradients.

This is the framework-free oracle of the toolkit: it produces layer
embeddings and Gradient*Input attribution maps without any deep-learning
stack, which keeps the whole pipeline testable end to end.

Weights are stored float32 (the exported precision); every computation
runs in float64 internally. The attribution of input ``x`` at layer tap
``k`` is ``x * d||F_k(x)||^2 / dx`` with ``F_k`` the post-activation
output of layer ``k``.

Networks serialize to the DEPN v1 container, which mirrors the DEPB
framing: magic ``DEPN``, version/flags/meta_len, JSON meta describing
the layers (d_in, d_out, activation) plus dtype and CRC-32 checksum,
then each layer's weight matrix (row-major) followed by its bias
vector, float32 little-endian, in layer order. File extension ``.depn``.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .bundles import DTYPE_TAG, FormatError, ProbeBundle, pack_container, read_container
from .errors import DeparaError

REFNET_MAGIC = b"DEPN"
ACTIVATIONS = ("identity", "relu", "tanh")

_F32 = np.dtype("<f4")


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_gradient(name: str, z: np.ndarray, a: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    # relu derivative at exactly 0 is taken as 0 (subgradient choice).
    if name == "identity":
        return upstream
    if name == "relu":
        return upstream * (z > 0.0)
    return upstream * (1.0 - a * a)


@dataclass(frozen=True, eq=False)
class Layer:
    """One dense layer: ``a = act(W x + b)`` with W of shape d_out x d_in."""

    weight: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        weight = np.array(self.weight, dtype=_F32, order="C", copy=True)
        bias = np.array(self.bias, dtype=_F32, copy=True)
        if weight.ndim != 2 or weight.shape[0] < 1 or weight.shape[1] < 1:
            raise DeparaError(f"layer weight must be a non-empty 2-D matrix, got shape {weight.shape}")
        if bias.ndim != 1 or bias.shape[0] != weight.shape[0]:
            raise DeparaError(f"layer bias must have length {weight.shape[0]}, got shape {bias.shape}")
        if self.activation not in ACTIVATIONS:
            raise DeparaError(
                f"unknown activation {self.activation!r}; supported: {', '.join(ACTIVATIONS)}"
            )
        if not (np.isfinite(weight).all() and np.isfinite(bias).all()):
            raise DeparaError("non-finite value in layer parameters")
        weight.flags.writeable = False
        bias.flags.writeable = False
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]

    @property
    def d_out(self) -> int:
        return self.weight.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Layer):
            return NotImplemented
        return (
            self.activation == other.activation
            and self.weight.shape == other.weight.shape
            and self.weight.tobytes() == other.weight.tobytes()
            and self.bias.tobytes() == other.bias.tobytes()
        )


@dataclass(frozen=True, eq=False)
class RefNet:
    """An immutable stack of dense layers; safe to share across threads."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DeparaError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].d_in != layers[k - 1].d_out:
                raise DeparaError(
                    f"dimension chain violation: layer {k + 1} expects d_in={layers[k].d_in} "
                    f"but layer {k} produces d_out={layers[k - 1].d_out}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].d_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].d_out

    @property
    def depth(self) -> int:
        return len(self.layers)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RefNet):
            return NotImplemented
        return self.layers == other.layers


def _check_tap(net: RefNet, tap: int) -> int:
    tap = int(tap)
    if not 1 <= tap <= net.depth:
        raise DeparaError(f"tap out of range: {tap} not in [1, {net.depth}]")
    return tap


def _as_input(net: RefNet, x) -> np.ndarray:
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != net.input_dim:
        raise DeparaError(f"input must be a vector of length {net.input_dim}, got shape {vec.shape}")
    return vec


def _trace(net: RefNet, x: np.ndarray, tap: int) -> list[tuple[Layer, np.ndarray, np.ndarray]]:
    steps = []
    h = x
    for layer in net.layers[:tap]:
        z = layer.weight.astype(np.float64) @ h + layer.bias.astype(np.float64)
        h = _apply_activation(layer.activation, z)
        steps.append((layer, z, h))
    return steps


def forward(net: RefNet, x, tap: int) -> np.ndarray:
    """Post-activation output of layer ``tap`` (1-based), in float64."""
    tap = _check_tap(net, tap)
    steps = _trace(net, _as_input(net, x), tap)
    return steps[-1][2]


def grad_sq_norm(net: RefNet, x, tap: int) -> np.ndarray:
    """Gradient of ``||F_tap(x)||^2`` with respect to the input vector.

    Reverse mode seeded with ``2 * F_tap(x)``; float64 throughout.
    """
    tap = _check_tap(net, tap)
    steps = _trace(net, _as_input(net, x), tap)
    g = 2.0 * steps[-1][2]
    for layer, z, a in reversed(steps):
        g = _activation_gradient(layer.activation, z, a, g)
        g = layer.weight.astype(np.float64).T @ g
    return g


def attribution(net: RefNet, x, tap: int) -> np.ndarray:
    """Gradient*Input attribution: ``x * grad_sq_norm(net, x, tap)``."""
    vec = _as_input(net, x)
    return vec * grad_sq_norm(net, vec, tap)


def export_bundle(net: RefNet, probe, tap: int, *, model_id: str, probe_id: str,
                  layer_id: str | None = None) -> ProbeBundle:
    """Run every probe row through the net and bundle embeddings + attributions."""
    tap = _check_tap(net, tap)
    rows = np.asarray(probe, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != net.input_dim:
        raise DeparaError(f"probe must be an n x {net.input_dim} matrix, got shape {rows.shape}")
    if rows.shape[0] < 2:
        raise DeparaError(f"need at least 2 probe points, got {rows.shape[0]}")
    embeddings = np.stack([forward(net, row, tap) for row in rows])
    attributions = np.stack([attribution(net, row, tap) for row in rows])
    return ProbeBundle(
        model_id=model_id,
        layer_id=layer_id if layer_id is not None else f"tap-{tap}",
        probe_id=probe_id,
        embeddings=embeddings,
        attributions=attributions,
    )


def write_refnet(net: RefNet, destination: BinaryIO) -> None:
    """Serialize a network to a DEPN v1 stream. Deterministic."""
    chunks = []
    arch = []
    for layer in net.layers:
        chunks.append(layer.weight.tobytes())
        chunks.append(layer.bias.tobytes())
        arch.append({"d_in": layer.d_in, "d_out": layer.d_out, "activation": layer.activation})
    payload = b"".join(chunks)
    meta = {"layers": arch, "dtype": DTYPE_TAG, "checksum": zlib.crc32(payload)}
    destination.write(pack_container(REFNET_MAGIC, meta, payload))


def read_refnet(source: BinaryIO) -> RefNet:
    """Parse a DEPN v1 stream, verifying magic, layer chain, and checksum."""
    meta, reader = read_container(source, REFNET_MAGIC, "DEPN")
    arch = meta.get("layers")
    if not isinstance(arch, list) or not arch:
        raise FormatError("bad DEPN metadata: missing layer list")
    if meta.get("dtype") != DTYPE_TAG:
        raise FormatError(f"unsupported payload dtype {meta.get('dtype')!r}")
    checksum = meta.get("checksum")
    if not isinstance(checksum, int):
        raise FormatError("bad DEPN metadata: missing checksum")
    dims = []
    total = 0
    for entry in arch:
        try:
            d_in, d_out = int(entry["d_in"]), int(entry["d_out"])
            act = str(entry["activation"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad DEPN layer description: {entry!r}") from exc
        if d_in < 1 or d_out < 1:
            raise FormatError(f"bad DEPN layer dimensions: {entry!r}")
        dims.append((d_in, d_out, act))
        total += 4 * (d_out * d_in + d_out)
    payload = reader.take(total, checksum)
    layers = []
    offset = 0
    for d_in, d_out, act in dims:
        weight = np.frombuffer(payload, dtype=_F32, count=d_out * d_in, offset=offset).reshape(d_out, d_in)
        offset += 4 * d_out * d_in
        bias = np.frombuffer(payload, dtype=_F32, count=d_out, offset=offset)
        offset += 4 * d_out
        layers.append(Layer(weight, bias, act))
    return RefNet(tuple(layers))


def save_refnet(net: RefNet, path: str | Path) -> None:
    with open(path, "wb") as handle:
        write_refnet(net, handle)


def load_refnet(path: str | Path) -> RefNet:
    try:
        with open(path, "rb") as handle:
            return read_refnet(handle)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def dense_net(specs: Iterable[tuple[Sequence, Sequence, str]]) -> RefNet:
    """Convenience constructor from (weight, bias, activation) triples."""
    return RefNet(tuple(Layer(w, b, act) for w, b, act in specs))
