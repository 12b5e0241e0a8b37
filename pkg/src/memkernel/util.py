"""Deterministic text serialisation helpers."""

import json
import math

import numpy as np


def fmt_float(x):
    """Shortest round-trip representation of a float (at most 17 digits)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt_float(x)
    return obj


def dumps(obj):
    """JSON text with sorted keys; identical input gives identical bytes."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"
