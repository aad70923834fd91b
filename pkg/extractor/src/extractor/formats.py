"""Writers for the downstream toolkit's on-disk formats.

The clustering toolkit consumes three files, all produced here bit-exactly
to its published layouts:

* ``.semb``: magic ``SEMB``, little-endian u32 version (=1), u32 n_items,
  u32 n_layers, u32 dim, then float32 LE values in item-major order.
* manifest JSON: ``{"task": ..., "label_set": [...], "items": [...]}``
  with posi items ``{"sent", "tok", "surface", "gold"}`` and colab items
  ``{"sent", "start", "end", "gold"}`` (end inclusive).
* ``.vec``: text header ``<count> <dim>`` then ``key v1 .. vdim`` lines.

All files are written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

SEMB_MAGIC = b"SEMB"
SEMB_VERSION = 1


def atomic_write_bytes(path, blob: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_semb(path, values: np.ndarray) -> None:
    """``values`` has shape (n_items, n_layers, dim), finite float32."""
    if values.ndim != 3:
        raise ValueError(f"expected 3-d array, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError("embedding array contains NaN or Inf")
    n_items, n_layers, dim = values.shape
    header = SEMB_MAGIC + struct.pack("<IIII", SEMB_VERSION, n_items, n_layers, dim)
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    atomic_write_bytes(path, header + payload)


def write_posi_manifest(path, items: list[dict], label_set: list[str]) -> None:
    doc = {"task": "posi", "label_set": label_set, "items": items}
    atomic_write_text(path, json.dumps(doc, ensure_ascii=False, indent=1) + "\n")


def write_colab_manifest(path, items: list[dict], label_set: list[str]) -> None:
    doc = {"task": "colab", "label_set": label_set, "items": items}
    atomic_write_text(path, json.dumps(doc, ensure_ascii=False, indent=1) + "\n")


def write_vec(path, entries: dict) -> None:
    """Write ``key -> float32 vector`` entries sorted by key."""
    dims = {len(v) for v in entries.values()}
    if len(dims) > 1:
        raise ValueError(f"inconsistent vector widths {sorted(dims)}")
    dim = dims.pop() if dims else 0
    lines = [f"{len(entries)} {dim}"]
    for key in sorted(entries):
        if not key or any(ch.isspace() for ch in key):
            raise ValueError(f"key {key!r} is empty or contains whitespace")
        vec = entries[key]
        lines.append(key + " " + " ".join(repr(float(x)) for x in vec))
    atomic_write_text(path, "\n".join(lines) + "\n")
