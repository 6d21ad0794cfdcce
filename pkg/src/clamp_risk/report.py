"""Deterministic JSON/CSV serialization of analysis results.

Floats are written with 17 significant digits so two runs over the same
input compare byte-for-byte. Infinities serialize as the strings "inf" and
"-inf" because JSON has no literal for them.
"""

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from typing import Any, Dict, Iterable, List, Sequence


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _encode(o: Any, level: int, indent: int) -> str:
    if o is None:
        return "null"
    if o is True:
        return "true"
    if o is False:
        return "false"
    if isinstance(o, float):
        return fmt_float(o) if math.isfinite(o) else json.dumps(fmt_float(o))
    if isinstance(o, int):
        return str(o)
    if isinstance(o, str):
        return json.dumps(o)
    if is_dataclass(o):
        o = asdict(o)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(o, dict):
        if not o:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, level + 1, indent)}" for k, v in o.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(o, (list, tuple)):
        if not o:
            return "[]"
        items = [pad + _encode(v, level + 1, indent) for v in o]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    return _encode(obj, 0, indent) + "\n"


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def to_csv(columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def flatten(d: Dict[str, Any], prefix: str = "") -> List[Dict[str, Any]]:
    """Key/value rows for results without a natural table shape."""
    rows = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            for i, item in enumerate(v):
                if isinstance(item, dict):
                    rows.extend(flatten(item, f"{key}[{i}]."))
                else:
                    rows.append({"key": f"{key}[{i}]", "value": item})
        else:
            rows.append({"key": key, "value": v})
    return rows
