"""Bridge from real pre-trained models to probe bundle files."""

from .containers import read_depn, write_depb
from .errors import ExportError
from .export import ExportSpec, export, load_probe_items
from .models import dense_from_depn, list_layers, load_model, resolve_layer

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportSpec",
    "dense_from_depn",
    "export",
    "list_layers",
    "load_model",
    "load_probe_items",
    "read_depn",
    "resolve_layer",
    "write_depb",
]
