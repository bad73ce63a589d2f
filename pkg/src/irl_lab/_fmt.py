"""Shared output helpers: 17-significant-digit floats, CSV text, atomic writes."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def fmt_float(x) -> str:
    return FLOAT_FMT % float(x)


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt_float(value)
    return str(value)


def csv_text(header, rows, comment: str | None = None) -> str:
    """Render a CSV document with LF line endings.

    Floats are written at 17 significant digits so that reading them back
    reproduces the exact double.  `comment` becomes a single leading line
    starting with '#'.
    """
    lines = []
    if comment:
        lines.append("# " + comment)
    lines.append(",".join(str(h) for h in header))
    for row in rows:
        lines.append(",".join(_cell(c) for c in row))
    return "\n".join(lines) + "\n"


def json_text(doc) -> str:
    """Canonical JSON rendering: sorted keys, fixed separators, LF-terminated."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def atomic_write_text(path, text: str) -> None:
    """Write a file via a same-directory temp file and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
