"""Model loading and layer enumeration.

Supported model references:

* a ``.depn`` file: rebuilt as ``nn.Sequential`` of Linear + activation
  modules (module names "0", "1", ...; the post-activation output of
  dense layer k is module ``str(2*k - 1)``)
* a ``.pt``/``.pth`` file: TorchScript archive or pickled ``nn.Module``
* ``torchvision:<name>``: a torchvision architecture with random
  weights unless a checkpoint is supplied out of band
"""

from __future__ import annotations

import zipfile
from pathlib import Path

import torch
from torch import nn

from .containers import read_depn
from .errors import ExportError

_ACTIVATIONS = {"identity": nn.Identity, "relu": nn.ReLU, "tanh": nn.Tanh}


def dense_from_depn(path: str | Path) -> nn.Sequential:
    """Build a dense torch model with weights copied from a DEPN file."""
    modules = []
    for weight, bias, activation in read_depn(path):
        if activation not in _ACTIVATIONS:
            raise ExportError(f"{path}: unknown activation {activation!r}")
        linear = nn.Linear(weight.shape[1], weight.shape[0])
        with torch.no_grad():
            linear.weight.copy_(torch.from_numpy(weight.copy()))
            linear.bias.copy_(torch.from_numpy(bias.copy()))
        modules.append(linear)
        modules.append(_ACTIVATIONS[activation]())
    return nn.Sequential(*modules)


def load_model(reference: str | nn.Module) -> nn.Module:
    if isinstance(reference, nn.Module):
        return reference
    if reference.startswith("torchvision:"):
        name = reference.split(":", 1)[1]
        try:
            from torchvision.models import get_model
        except ImportError as exc:
            raise ExportError("torchvision is not installed") from exc
        try:
            return get_model(name, weights=None)
        except ValueError as exc:
            raise ExportError(f"unknown torchvision model {name!r}") from exc
    path = Path(reference)
    if path.suffix == ".depn":
        return dense_from_depn(path)
    if path.suffix in (".pt", ".pth"):
        if not path.is_file():
            raise ExportError(f"no such model file: {reference}")
        try:
            obj = torch.load(str(path), map_location="cpu", weights_only=False)
        except (RuntimeError, zipfile.BadZipFile):
            obj = torch.jit.load(str(path), map_location="cpu")  # TorchScript archive
        if not isinstance(obj, nn.Module):
            raise ExportError(f"{reference}: loaded object is not a torch module")
        return obj
    raise ExportError(
        f"unrecognized model reference {reference!r}: expected a .depn / .pt / .pth "
        "path or torchvision:<name>"
    )


def list_layers(reference: str | nn.Module) -> list[str]:
    """Ordered names of every submodule, usable as layer selectors."""
    model = load_model(reference)
    return [name for name, _ in model.named_modules() if name]


def resolve_layer(model: nn.Module, selector: str) -> nn.Module:
    try:
        return model.get_submodule(selector)
    except AttributeError as exc:
        names = [name for name, _ in model.named_modules() if name]
        listing = ", ".join(names) if names else "(model has no submodules)"
        raise ExportError(f"no layer named {selector!r}; available layers: {listing}") from exc
