"""Running probe data through a model layer and writing probe bundles.

Per probe item x the exported rows are

    embedding   = flatten(F(x))            (optionally pooled first)
    attribution = flatten(x * d||F(x)||^2 / dx)

with F the selected layer's output in inference mode and the gradient
taken by autograd. When the layer output keeps spatial dimensions the
flatten policy must be chosen explicitly (``pool="avg"`` for global
average pooling, ``pool="flatten"`` for row-major flattening); it is
never defaulted silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .containers import write_depb
from .errors import ExportError
from .models import load_model, resolve_layer

_ARRAY_SUFFIXES = {".npy"}
_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


@dataclass
class ExportSpec:
    model: str
    layer: str
    probe_dir: str
    out: str
    pool: str | None = None  # None | "avg" | "flatten"
    resize: tuple[int, int] | None = None
    normalize: tuple[list[float], list[float]] | None = None
    model_id: str | None = None
    probe_id: str | None = None


def _load_image(path: Path, resize: tuple[int, int] | None) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError as exc:
        raise ExportError("pillow is required to read image probes") from exc
    with Image.open(path) as img:
        img = img.convert("RGB")
        if resize is not None:
            img = img.resize((resize[1], resize[0]), Image.BILINEAR)
        chw = np.asarray(img, dtype=np.float32).transpose(2, 0, 1) / 255.0
    return chw


def _load_item(path: Path, spec: ExportSpec) -> np.ndarray:
    if path.suffix in _ARRAY_SUFFIXES:
        arr = np.load(path)
        if not np.issubdtype(arr.dtype, np.number):
            raise ExportError(f"{path}: probe array is not numeric")
        return np.asarray(arr, dtype=np.float32)
    if path.suffix in _IMAGE_SUFFIXES:
        return _load_image(path, spec.resize)
    raise ExportError(f"{path}: unsupported probe item (expected .npy or an image)")


def _normalize(item: np.ndarray, normalize: tuple[list[float], list[float]]) -> np.ndarray:
    mean, std = (np.asarray(v, dtype=np.float32) for v in normalize)
    if any(v.ndim > 1 for v in (mean, std)):
        raise ExportError("normalization constants must be scalars or flat lists")
    shape = (-1,) + (1,) * (item.ndim - 1)
    for name, v in (("mean", mean), ("std", std)):
        if v.size not in (1, item.shape[0]):
            raise ExportError(
                f"normalization {name} has {v.size} values but probe items have "
                f"{item.shape[0]} channels"
            )
    if np.any(std == 0.0):
        raise ExportError("normalization std contains zero")
    return (item - mean.reshape(shape) if mean.size > 1 else item - float(mean)) / (
        std.reshape(shape) if std.size > 1 else float(std)
    )


def load_probe_items(spec: ExportSpec) -> tuple[list[str], np.ndarray]:
    root = Path(spec.probe_dir)
    if not root.is_dir():
        raise ExportError(f"not a directory: {spec.probe_dir}")
    paths = sorted(p for p in root.iterdir()
                   if p.suffix in _ARRAY_SUFFIXES | _IMAGE_SUFFIXES)
    if len(paths) < 2:
        raise ExportError(f"need at least 2 probe items, found {len(paths)} in {spec.probe_dir}")
    items = []
    shape = None
    for path in paths:
        item = _load_item(path, spec)
        if spec.normalize is not None:
            item = _normalize(item, spec.normalize)
        if shape is None:
            shape = item.shape
        elif item.shape != shape:
            raise ExportError(
                f"shape drift across probe items: {paths[0].name} is {shape}, "
                f"{path.name} is {item.shape}"
            )
        items.append(item)
    return [p.name for p in paths], np.stack(items)


def _flatten_features(feat: torch.Tensor, pool: str | None) -> torch.Tensor:
    # feat has a leading batch dimension of 1
    if feat.dim() > 2:
        if pool is None:
            raise ExportError(
                f"layer output has spatial dimensions {tuple(feat.shape[1:])}; "
                "choose a flatten policy with pool='avg' or pool='flatten'"
            )
        if pool == "avg":
            feat = feat.mean(dim=tuple(range(2, feat.dim())))
        elif pool == "flatten":
            feat = feat.flatten(1)
        else:
            raise ExportError(f"unknown pool policy {pool!r}; expected 'avg' or 'flatten'")
    return feat.flatten(1)


def export(spec: ExportSpec) -> Path:
    """Run the probe through the model and write the bundle; returns the path."""
    model = load_model(spec.model)
    model.eval()
    module = resolve_layer(model, spec.layer)
    _names, probe = load_probe_items(spec)

    captured: dict[str, torch.Tensor] = {}

    def keep_output(_module, _inputs, output):
        if not isinstance(output, torch.Tensor):
            raise ExportError(f"layer {spec.layer!r} does not produce a single tensor")
        captured["out"] = output

    handle = module.register_forward_hook(keep_output)
    embeddings = []
    attributions = []
    try:
        for row in probe:
            x = torch.from_numpy(np.ascontiguousarray(row)).unsqueeze(0)
            x.requires_grad_(True)
            captured.clear()
            with torch.enable_grad():
                model(x)
                if "out" not in captured:
                    raise ExportError(f"layer {spec.layer!r} was not reached by the forward pass")
                emb = _flatten_features(captured["out"], spec.pool)
                (emb ** 2).sum().backward()
            if x.grad is None:
                raise ExportError(f"layer {spec.layer!r} is not connected to the input")
            embeddings.append(emb.detach().reshape(-1).numpy())
            attributions.append((x.detach() * x.grad).reshape(-1).numpy())
    finally:
        handle.remove()

    out = Path(spec.out)
    model_id = spec.model_id if spec.model_id else str(spec.model)
    probe_id = spec.probe_id if spec.probe_id else Path(spec.probe_dir).name
    write_depb(
        out,
        model_id=model_id,
        layer_id=spec.layer,
        probe_id=probe_id,
        embeddings=np.stack(embeddings),
        attributions=np.stack(attributions),
    )
    return out
