"""Random number and file helpers used by several modules.

All randomness flows through :func:`make_rng`, which returns a numpy
``Generator`` backed by PCG64. PCG64 output is specified bit-for-bit, so a
given seed yields the same stream on every platform.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(base_seed: int, *parts: int) -> int:
    """Mix ``base_seed`` with integer ``parts`` into a new 32-bit seed."""
    ss = np.random.SeedSequence([int(base_seed), *(int(p) for p in parts)])
    return int(ss.generate_state(1)[0])


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=None, separators=(",", ":")) + "\n"


def csv_text(header, rows) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else _fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
