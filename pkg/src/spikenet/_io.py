"""CSV helpers shared by the oracle, experiments and CLI."""
from __future__ import annotations

import csv
import io
import math
import os
from typing import Iterable, Sequence


def fmt(x) -> str:
    """Locale-free round-trip formatting (17 significant digits for floats)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    if hasattr(x, "item"):  # numpy scalar
        return fmt(x.item())
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence],
              comments: Sequence[str] = ()) -> None:
    text = csv_text(header, rows, comments)
    with open(path, "w", newline="") as fh:
        fh.write(text)
