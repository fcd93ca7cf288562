"""CSV output with ``#`` metadata lines.

Nothing time- or machine-dependent is written, so equal inputs and seeds give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from rdcp import __version__


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    if isinstance(x, bytes):
        return x.hex()
    return str(x)


def csv_text(columns, rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# rdcp {__version__}\n")
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        if isinstance(r, dict):
            r = [r.get(c) for c in columns]
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def write_csv(path, columns, rows, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows, meta), encoding="utf-8")
    return path


def read_csv(path) -> list:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
