"""Conversion of result objects to JSON-compatible structures."""

from __future__ import annotations

import dataclasses
import math

import numpy as np


def to_jsonable(obj):
    """Recursively convert dataclasses, numpy values and non-finite floats.

    ``inf``/``-inf``/``nan`` become the strings "inf", "-inf", "nan" so the output
    is strict JSON.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj) + 0.0  # drops the sign of -0.0
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_spec"):
        return obj.to_spec()
    if hasattr(obj, "O") and hasattr(obj, "k"):
        return {"basis": to_jsonable(obj.O.T)}
    return repr(obj)
