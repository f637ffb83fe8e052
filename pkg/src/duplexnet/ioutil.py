"""Small output helpers: atomic writes and dump-file formats."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def matrix_csv(values: np.ndarray, digits: int = 17) -> str:
    """Square matrix as comma-separated rows, fixed significant digits."""
    lines = []
    for row in values:
        lines.append(",".join(format(v, f".{digits}g") for v in row))
    return "\n".join(lines) + "\n"


def edgelist_text(edges, tickers) -> str:
    """One ``ticker_a ticker_b`` pair per line, sorted."""
    lines = sorted(f"{tickers[u]} {tickers[v]}" for u, v in edges)
    return "\n".join(lines) + ("\n" if lines else "")
