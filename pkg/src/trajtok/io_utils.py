"""Canonical JSON / JSONL serialization helpers.

All artifact files in this package are UTF-8 JSON with sorted keys and
compact separators, so that save -> load -> save round-trips are
byte-identical. Floats survive the round trip exactly because Python's
``repr`` (used by ``json``) emits the shortest representation that parses
back to the same IEEE-754 double.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Any, Iterable, Iterator

from .errors import DataError


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_json(path: str | os.PathLike, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_dumps(obj))
        fh.write("\n")


def read_json(path: str | os.PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path: str | os.PathLike, records: Iterable[Any]) -> int:
    """Write one canonical-JSON record per line; returns the record count."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(canonical_dumps(rec))
            fh.write("\n")
            n += 1
    return n


def iter_jsonl(path: str | os.PathLike) -> Iterator[tuple[int, Any]]:
    """Yield (1-based line number, parsed record), skipping blank lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc


def read_jsonl(path: str | os.PathLike) -> list[Any]:
    return [rec for _, rec in iter_jsonl(path)]


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
