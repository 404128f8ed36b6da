"""Canonical JSON serialization.

Every artifact this engine writes (scene files, pack files, state hashes,
log lines) goes through one of the two writers below so that equal data
always produces identical bytes:

* object keys sorted lexicographically,
* arrays kept in declaration order,
* floats rendered as the shortest decimal string that round-trips,
* UTF-8, LF line endings.

``dumps`` is the indented document form (2 spaces, trailing newline);
``dumps_line`` is the compact single-line form used for log records and
hashing.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def dumps(value: Any) -> str:
    """Render ``value`` as an indented canonical JSON document."""
    return json.dumps(value, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dumps_bytes(value: Any) -> bytes:
    return dumps(value).encode("utf-8")


def dumps_line(value: Any) -> str:
    """Render ``value`` as a single compact canonical JSON line (no newline)."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(value: Any) -> str:
    """SHA-256 digest of the compact canonical rendering of ``value``."""
    return hashlib.sha256(dumps_line(value).encode("utf-8")).hexdigest()
