"""Versioned JSON and CSV persistence with fixed float formatting and atomic writes."""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError

DOMAIN_FORMAT = "serrin-domain/1"
BAND_FORMAT = "serrin-band/1"
FORMATS = (DOMAIN_FORMAT, BAND_FORMAT)
ARRAY_KEYS = ("x", "y", "re_g", "im_g", "v", "omega")
DIGITS = 17


def fmt_float(x) -> str:
    """17 significant digits; non-finite values become null."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, f".{DIGITS}g")


def _dump(obj, indent: int, level: int, out: list) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for k, (key, val) in enumerate(items):
            out.append(pad + json.dumps(str(key)) + ": ")
            _dump(val, indent, level + 1, out)
            out.append(",\n" if k < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, np.ndarray):
        _dump(obj.tolist(), indent, level, out)
    elif isinstance(obj, (list, tuple)):
        if all(isinstance(t, (int, float, np.floating, np.integer)) and not isinstance(t, bool) for t in obj):
            out.append("[" + ", ".join(_scalar(t) for t in obj) + "]")
            return
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for k, val in enumerate(obj):
            out.append(pad)
            _dump(val, indent, level + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        out.append(_scalar(obj))


def _scalar(t) -> str:
    if t is None or isinstance(t, (bool, np.bool_)):
        return json.dumps(None if t is None else bool(t))
    if isinstance(t, (int, np.integer)):
        return str(int(t))
    if isinstance(t, (float, np.floating)):
        return fmt_float(t)
    if isinstance(t, complex):
        return "[" + fmt_float(t.real) + ", " + fmt_float(t.imag) + "]"
    if isinstance(t, str):
        return json.dumps(t)
    raise TypeError(f"cannot serialise {type(t).__name__}")


def dumps(obj, indent: int = 1) -> str:
    out: list = []
    _dump(obj, indent, 0, out)
    out.append("\n")
    return "".join(out)


def atomic_write(path, text: str) -> Path:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix="." + path.name + ".", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, payload: dict) -> Path:
    return atomic_write(path, dumps(payload))


def read_payload(path) -> dict:
    """Load and validate a domain or band file; any defect raises FormatError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from e
    validate(data)
    return data


def validate(data) -> None:
    if not isinstance(data, dict):
        raise FormatError("payload must be a JSON object")
    fmt = data.get("format")
    if fmt not in FORMATS:
        raise FormatError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    for key in ("metadata", "arrays", "tolerances"):
        if not isinstance(data.get(key), dict):
            raise FormatError(f"missing object {key!r}")
    arr = data["arrays"]
    for key in ARRAY_KEYS:
        if key not in arr:
            raise FormatError(f"missing array {key!r}")
    nx, ny = len(arr["x"]), len(arr["y"])
    for key in ("re_g", "im_g", "v", "omega"):
        a = arr[key]
        if len(a) != nx or any(len(row) != ny for row in a):
            raise FormatError(f"array {key!r} is not {nx} x {ny}")
        if any(t is None for row in a for t in row):
            raise FormatError(f"array {key!r} has non-finite entries")
    for key in ("x", "y"):
        if any(t is None for t in arr[key]):
            raise FormatError(f"array {key!r} has non-finite entries")
    for c in data.get("curves", []):
        if not isinstance(c, dict) or len(c.get("re", [])) != len(c.get("im", [])) or not c.get("re"):
            raise FormatError("malformed boundary curve")


def arrays_of(data: dict) -> dict:
    arr = data["arrays"]
    out = {k: np.asarray(arr[k], dtype=float) for k in ARRAY_KEYS}
    out["g"] = out["re_g"] + 1j * out["im_g"]
    return out


def curves_of(data: dict) -> list:
    return [(np.asarray(c["re"], dtype=float) + 1j * np.asarray(c["im"], dtype=float), bool(c.get("closed", True)))
            for c in data.get("curves", [])]


def curve_entry(name: str, poly, closed: bool) -> dict:
    poly = np.asarray(poly)
    return {"name": name, "closed": bool(closed), "re": poly.real, "im": poly.imag}


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Comma-separated, '.' decimal, one header row whose names carry units in brackets."""
    lines = [",".join(header)]
    for r in rows:
        cells = []
        for t in r:
            if isinstance(t, str):
                cells.append(t)
            elif t is None:
                cells.append("")
            elif isinstance(t, (bool, np.bool_)):
                cells.append("1" if t else "0")
            elif isinstance(t, (int, np.integer)):
                cells.append(str(int(t)))
            else:
                x = float(t)
                cells.append(format(x, f".{DIGITS}g") if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan"))
        lines.append(",".join(cells))
    return atomic_write(path, "\n".join(lines) + "\n")
