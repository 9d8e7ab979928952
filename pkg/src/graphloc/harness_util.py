"""Content hashing and stable string-to-int keys for run manifests."""

from __future__ import annotations

import hashlib
from pathlib import Path


def content_hash(path) -> str:
    """Hash of a file's bytes in git blob form:
    sha1("blob <len>\\0" + content)."""
    data = Path(path).read_bytes()
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def stable_int(text: str) -> int:
    """Deterministic 64-bit integer key for a string (unlike hash(),
    stable across processes)."""
    digest = hashlib.sha1(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
