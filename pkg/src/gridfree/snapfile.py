"""Snapshot files: CSV with a two-line header.

Layout::

    M,L,spacing_over_lambda,frequency
    21,1,0.5,125 Hz
    re_0,im_0,re_1,im_1,...        (L rows, one per snapshot)

Values are written with ``repr`` so reading back is bit-exact.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from typing import Sequence

import numpy as np

from .errors import ParseError
from .model import ArrayGeometry, Snapshot

HEADER = ["M", "L", "spacing_over_lambda", "frequency"]


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_snapshots(snapshots: Sequence[Snapshot], frequency: str = "") -> str:
    if not snapshots:
        raise ValueError("no snapshots to write")
    g = snapshots[0].geometry
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    w.writerow([g.M, len(snapshots), repr(float(g.spacing_over_lambda)), frequency])
    for s in snapshots:
        row = []
        for v in s.y:
            row.extend([repr(float(v.real)), repr(float(v.imag))])
        w.writerow(row)
    return buf.getvalue()


def write_snapshots(path: str, snapshots: Sequence[Snapshot], frequency: str = "") -> None:
    atomic_write_text(path, format_snapshots(snapshots, frequency))


def parse_snapshots(text: str, source: str = "<string>"):
    """Return ``(snapshots, frequency_label)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise ParseError("missing two-line header", f"{source}:1")
    if [c.strip() for c in rows[0]] != HEADER:
        raise ParseError(f"first header line must be {','.join(HEADER)}", f"{source}:1")
    hdr = rows[1]
    if len(hdr) != 4:
        raise ParseError("second header line needs 4 fields", f"{source}:2")
    try:
        M, L = int(hdr[0]), int(hdr[1])
        d = float(hdr[2])
    except ValueError as exc:
        raise ParseError(str(exc), f"{source}:2") from None
    if M < 2 or L < 1 or not (d > 0 and math.isfinite(d)):
        raise ParseError("need M >= 2, L >= 1 and positive spacing", f"{source}:2")
    body = [r for r in rows[2:]]
    while body and not any(c.strip() for c in body[-1]):
        body.pop()
    if len(body) != L:
        raise ParseError(f"expected {L} snapshot rows, found {len(body)}", f"{source}:{3 + len(body)}")
    geom = ArrayGeometry.ula(M, d)
    out = []
    for k, r in enumerate(body):
        line = k + 3
        if len(r) != 2 * M:
            raise ParseError(f"expected {2 * M} columns, found {len(r)}", f"{source}:{line}")
        try:
            vals = np.array([float(c) for c in r])
        except ValueError as exc:
            raise ParseError(str(exc), f"{source}:{line}") from None
        if not np.all(np.isfinite(vals)):
            raise ParseError("non-finite value", f"{source}:{line}")
        out.append(Snapshot(vals[0::2] + 1j * vals[1::2], geom, label=hdr[3]))
    return out, hdr[3]


def ingest_snapshots(path: str) -> list[Snapshot]:
    with open(path, newline="") as fh:
        text = fh.read()
    return parse_snapshots(text, os.path.basename(path))[0]
