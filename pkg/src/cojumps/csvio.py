"""CSV helpers shared by the pipeline stages.

Every file is written atomically (temp file + rename) and may carry one
leading ``#`` comment line with provenance; readers skip such lines.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def atomic_write_text(path, text: str) -> None:
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


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comment: str | None = None) -> None:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def read_rows(path, required: Sequence[str], allow_empty: bool = False) -> list[tuple[int, dict[str, str]]]:
    """Read a headed CSV into ``(lineno, row)`` pairs.

    Comment (``#``) and blank lines are skipped. Raises ``ParseError`` with
    the offending line number on a missing column or a ragged row. A file
    with no header at all is an error unless ``allow_empty``.
    """
    rows = []
    header = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                fields = next(csv.reader([line]))
            except csv.Error as exc:
                raise ParseError(str(exc), lineno) from exc
            if header is None:
                header = [f.strip() for f in fields]
                missing = [c for c in required if c not in header]
                if missing:
                    raise ParseError(f"missing column(s) {missing} in header", lineno)
                continue
            if len(fields) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(fields)}", lineno)
            rows.append((lineno, {k: v.strip() for k, v in zip(header, fields)}))
    if header is None and not allow_empty:
        raise ParseError("missing header row")
    return rows
