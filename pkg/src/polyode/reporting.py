"""Deterministic report serialization and fitting helpers.

Reports must be byte-identical for identical configs and seeds, so floats are
always rendered with 17 significant digits (enough to round-trip a double)
and JSON objects keep insertion order.
"""

from __future__ import annotations

import json
import math

import numpy as np

__all__ = ["format_float", "canonical_json", "write_json", "write_rows_csv", "fit_loglog"]


def format_float(x):
    """17-significant-digit rendering, stable across runs."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def canonical_json(obj, indent=0):
    """Render nested dicts/lists/scalars with fixed float formatting.

    json.dumps delegates float rendering to repr, which is shortest-roundtrip
    rather than fixed-width; this writer pins the byte representation.
    """
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {canonical_json(v, indent + 2)}'
            for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = ",\n".join(f"{pad}  {canonical_json(v, indent + 2)}" for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return json.dumps(format_float(x))  # JSON has no nan/inf literals
        return format_float(x)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, complex):
        return canonical_json([obj.real, obj.imag], indent)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(obj))
        fh.write("\n")


def write_rows_csv(rows, path):
    """Write the fixed-order (n, dt, T, metric, value) row table."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,dt,T,metric,value\n")
        for n, dt, T, metric, value in rows:
            if isinstance(value, str):
                rendered = value
            else:
                rendered = format_float(value)
            fh.write(f"{n},{format_float(dt)},{T},{metric},{rendered}\n")


def fit_loglog(xs, ys, min_points=4):
    """Least-squares slope of log(y) vs log(x) with a residual-based error bar.

    Returns a dict with slope, intercept, stderr and a 95% interval, or
    slope None with a reason when the fit is impossible (fewer than
    `min_points` usable points or nonpositive values).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    mask = (xs > 0) & (ys > 0) & np.isfinite(xs) & np.isfinite(ys)
    if mask.sum() < min_points:
        return {
            "slope": None,
            "intercept": None,
            "stderr": None,
            "ci95": None,
            "points": int(mask.sum()),
            "reason": "insufficient positive points",
        }
    lx = np.log(xs[mask])
    ly = np.log(ys[mask])
    npts = len(lx)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    dof = max(npts - 2, 1)
    sigma2 = float(resid @ resid) / dof
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(sigma2 / sxx) if sxx > 0 else float("inf")
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "stderr": stderr,
        "ci95": [float(slope - 1.96 * stderr), float(slope + 1.96 * stderr)],
        "points": npts,
        "reason": None,
    }
