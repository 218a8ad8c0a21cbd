"""File helpers: atomic writes, JSONL iteration, TSV field escaping."""

from __future__ import annotations

import json
import os
import tempfile
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import IO

from .errors import DataValidationError


@contextmanager
def atomic_write(path: str | Path, encoding: str = "utf-8") -> Iterator[IO[str]]:
    """Write to a temp file next to the target, rename on success.

    A failure inside the block never leaves a partial file at ``path``.
    """
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding=encoding, newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for each JSON object line.

    Comment lines starting with '#' and blank lines are skipped.
    """
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if line.startswith("#"):
                continue
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"{path}:{line_no}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataValidationError(f"{path}:{line_no}: expected a JSON object")
            yield line_no, obj


def dump_json_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False)


_TSV_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}


def escape_tsv_field(value: str) -> str:
    """Escape backslash, tab, and line breaks so any string fits one TSV cell."""
    out = []
    for ch in value:
        out.append(_TSV_ESCAPES.get(ch, ch))
    return "".join(out)


def unescape_tsv_field(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            mapped = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt)
            if mapped is not None:
                out.append(mapped)
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)
