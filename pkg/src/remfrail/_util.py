"""Small formatting helpers shared by report writers."""

from __future__ import annotations

import json
import math
from typing import Any


def fmt12(x: float) -> str:
    """Format a float at 12 significant digits (report determinism contract)."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(float(x), ".12g")


def round12(x: float) -> float:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return x
    return float(fmt12(x))


def round12_tree(obj: Any) -> Any:
    """Recursively round all floats in a JSON-ready structure to 12 digits."""
    if isinstance(obj, float):
        return round12(obj)
    if isinstance(obj, dict):
        return {k: round12_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round12_tree(v) for v in obj]
    return obj


def dump_json(obj: Any, indent: int = 2) -> str:
    return json.dumps(round12_tree(obj), indent=indent, sort_keys=True,
                      allow_nan=True)
