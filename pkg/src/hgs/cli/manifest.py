"""Canonical JSON, content hashes and run manifests."""
from __future__ import annotations

import hashlib
import json
import platform

import numpy as np


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, default=_plain)


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def content_hash(obj) -> str:
    """Git blob hash (sha1 over "blob <len>\\0" + canonical JSON)."""
    data = canonical_json(obj).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def file_hash(path) -> str:
    with open(path, "rb") as f:
        data = f.read()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_json(path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True, default=_plain)
        f.write("\n")


def environment() -> dict:
    from .. import __version__
    from ..mnode import backend
    return {"hgs": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "kernel": backend.name}
