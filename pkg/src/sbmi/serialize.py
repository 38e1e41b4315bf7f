"""Deterministic serialization for run artifacts.

Every emitted file must be byte-identical across repeated runs with the
same config and seed, so floats are rendered with a fixed 17
significant digit format (enough to round-trip IEEE doubles), JSON
object keys are sorted, and the CSV dialect is pinned to '\\n' line
endings.  Non-finite floats are written as the NaN / Infinity tokens
that ``json.loads`` accepts back.
"""

import json
import math

import numpy as np

SCHEMA_VERSION = 1


def render_float(x):
    """Fixed-width float rendering: 17 significant digits, round-trip safe."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    # keep float-ness through a json round trip
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def _render(obj, out):
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(render_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be str, got {key!r}")
            if not first:
                out.append(", ")
            out.append(json.dumps(key))
            out.append(": ")
            _render(obj[key], out)
            first = False
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(", ")
            _render(item, out)
        out.append("]")
    elif isinstance(obj, np.ndarray):
        _render(obj.tolist(), out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj):
    """Render obj as a deterministic JSON string (sorted keys, pinned floats)."""
    out = []
    _render(obj, out)
    out.append("\n")
    return "".join(out)


def render_cell(value):
    """One CSV cell.  Floats get the pinned rendering, everything else str()."""
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return render_float(value)
    return str(value)


def render_csv(header, rows):
    """Deterministic CSV text: comma separated, '\\n' terminated rows."""
    lines = [",".join(str(h) for h in header)]
    for row in rows:
        cells = [render_cell(v) for v in row]
        for c in cells:
            if "," in c or "\n" in c or '"' in c:
                raise ValueError(f"CSV cell needs quoting, refusing: {c!r}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def wrap_payload(command, run_config_record, params_record, result):
    """Standard JSON envelope embedded in every emitted artifact."""
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "run_config": run_config_record,
        "params": params_record,
        "result": result,
    }
