"""Deterministic machine-readable output: stable key order, 9 significant digits."""

from __future__ import annotations

import json

import numpy as np


def fmt_float(value: float) -> str:
    return f"{value:.9g}"


def round_floats(obj):
    """Recursively round floats to 9 significant digits for stable output."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (float, np.floating)):
        return float(fmt_float(float(obj)))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {key: round_floats(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [round_floats(value) for value in obj.tolist()]
    return obj


def dumps(obj) -> str:
    """JSON with sorted keys, rounded floats, and a trailing newline."""
    return json.dumps(round_floats(obj), sort_keys=True, indent=2) + "\n"
