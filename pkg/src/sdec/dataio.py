"""On-disk formats and dataset assembly.

Three formats live here:

* ``.semb`` -- binary embedding tensor. Layout: magic ``SEMB``, then
  little-endian u32 version (=1), u32 n_items, u32 n_layers, u32 dim,
  then n_items*n_layers*dim float32 values in item-major order.
  Total size is exactly ``20 + 4 * n_items * n_layers * dim`` bytes.
* manifest -- UTF-8 JSON: ``{"task": "posi"|"colab", "label_set": [...],
  "items": [...]}``. A posi item is ``{"sent", "tok", "surface", "gold"}``,
  a colab item is ``{"sent", "start", "end", "gold"}`` (end inclusive).
* ``.vec`` -- text vector table: header line ``<count> <dim>``, then one
  ``key v1 .. vdim`` line per entry, space separated.

Loading pairs a ``.semb`` with a manifest, averages the requested layers
and checks that row and item counts agree. All values are float32
little-endian on disk regardless of platform.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    AlignmentError,
    ArgumentError,
    CorruptionError,
    FormatError,
    UnsupportedVersionError,
    ValidationError,
)

SEMB_MAGIC = b"SEMB"
SEMB_VERSION = 1
TASK_POSI = "posi"
TASK_COLAB = "colab"

PathLike = Union[str, Path]


@dataclass(frozen=True)
class EmbeddingTensor:
    """Raw per-layer embeddings for N items: shape (n_items, n_layers, dim)."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 3:
            raise ArgumentError(f"embedding tensor must be 3-d, got shape {v.shape}")
        if v.shape[1] < 1 or v.shape[2] < 1:
            raise ArgumentError(f"n_layers and dim must be >= 1, got shape {v.shape}")
        if v.dtype != np.float32:
            raise ArgumentError(f"embedding tensor must be float32, got {v.dtype}")
        if not np.isfinite(v).all():
            raise ValidationError("embedding tensor contains NaN or Inf")

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_layers(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class PosiItem:
    sent: int
    tok: int
    surface: str
    gold: str


@dataclass(frozen=True)
class ColabItem:
    sent: int
    start: int
    end: int  # inclusive
    gold: str


@dataclass(frozen=True)
class DatasetManifest:
    task: str
    label_set: tuple[str, ...]
    items: tuple  # of PosiItem or ColabItem

    def __post_init__(self):
        if self.task not in (TASK_POSI, TASK_COLAB):
            raise ValidationError(f"unknown task {self.task!r}")
        labels = set(self.label_set)
        if len(labels) != len(self.label_set):
            raise ValidationError("label_set contains duplicates")
        want = PosiItem if self.task == TASK_POSI else ColabItem
        for i, item in enumerate(self.items):
            if not isinstance(item, want):
                raise ValidationError(f"item {i} is not a {want.__name__}")
            if item.gold not in labels:
                raise ValidationError(
                    f"item {i} gold label {item.gold!r} missing from label_set"
                )
            if item.sent < 0:
                raise ValidationError(f"item {i} has negative sentence index")
            if isinstance(item, PosiItem):
                if item.tok < 0:
                    raise ValidationError(f"item {i} has negative token index")
            else:
                if item.start < 0 or item.start > item.end:
                    raise ValidationError(
                        f"item {i} span ({item.start}, {item.end}) is invalid"
                    )

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class Dataset:
    """Pooled item embeddings (N x D float32) paired with their manifest."""

    matrix: np.ndarray
    manifest: DatasetManifest

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ArgumentError(f"dataset matrix must be 2-d, got {self.matrix.shape}")
        if self.matrix.shape[0] != len(self.manifest):
            raise AlignmentError(
                f"matrix has {self.matrix.shape[0]} rows but manifest lists "
                f"{len(self.manifest)} items"
            )

    @property
    def n_items(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def task(self) -> str:
        return self.manifest.task


@dataclass(frozen=True)
class MorphTable:
    """Character n-gram -> float32 vector lookup, all vectors of equal width."""

    dim: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ArgumentError(f"morph table dim must be >= 1, got {self.dim}")
        for key, vec in self.entries.items():
            if not key:
                raise ValidationError("morph table contains an empty key")
            if vec.shape != (self.dim,):
                raise ValidationError(
                    f"vector for {key!r} has shape {vec.shape}, expected ({self.dim},)"
                )

    def __len__(self) -> int:
        return len(self.entries)


def write_semb(tensor: EmbeddingTensor, path: PathLike) -> None:
    """Write an embedding tensor in the ``.semb`` binary format."""
    header = SEMB_MAGIC + struct.pack(
        "<IIII", SEMB_VERSION, tensor.n_items, tensor.n_layers, tensor.dim
    )
    payload = np.ascontiguousarray(tensor.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_semb(path: PathLike) -> EmbeddingTensor:
    """Read a ``.semb`` file, validating magic, version and exact length."""
    raw = Path(path).read_bytes()
    if len(raw) < 20:
        raise FormatError(f"{path}: file too short for a SEMB header")
    if raw[:4] != SEMB_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {SEMB_MAGIC!r}")
    version, n_items, n_layers, dim = struct.unpack("<IIII", raw[4:20])
    if version != SEMB_VERSION:
        raise UnsupportedVersionError(f"{path}: version {version} not supported")
    if n_layers < 1 or dim < 1:
        raise FormatError(f"{path}: header declares n_layers={n_layers}, dim={dim}")
    expected = 20 + 4 * n_items * n_layers * dim
    if len(raw) != expected:
        raise CorruptionError(
            f"{path}: expected {expected} bytes for {n_items}x{n_layers}x{dim}, "
            f"found {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=20).astype(np.float32)
    values = values.reshape(n_items, n_layers, dim)
    return EmbeddingTensor(values)


def pool_layers(tensor: EmbeddingTensor, layer_subset: Iterable[int]) -> np.ndarray:
    """Average the selected layers for every item, yielding an N x D matrix."""
    layers = sorted(set(int(i) for i in layer_subset))
    if not layers:
        raise ArgumentError("layer subset is empty")
    if layers[0] < 0 or layers[-1] >= tensor.n_layers:
        raise ArgumentError(
            f"layer subset {layers} out of range for {tensor.n_layers} layers"
        )
    return tensor.values[:, layers, :].mean(axis=1, dtype=np.float32)


def _manifest_to_dict(manifest: DatasetManifest) -> dict:
    if manifest.task == TASK_POSI:
        items = [
            {"sent": it.sent, "tok": it.tok, "surface": it.surface, "gold": it.gold}
            for it in manifest.items
        ]
    else:
        items = [
            {"sent": it.sent, "start": it.start, "end": it.end, "gold": it.gold}
            for it in manifest.items
        ]
    return {"task": manifest.task, "label_set": list(manifest.label_set), "items": items}


def write_manifest(manifest: DatasetManifest, path: PathLike) -> None:
    """Write a manifest as UTF-8 JSON."""
    text = json.dumps(_manifest_to_dict(manifest), ensure_ascii=False, indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _require_keys(obj: dict, keys: set[str], what: str) -> None:
    got = set(obj)
    if got != keys:
        missing = keys - got
        extra = got - keys
        parts = []
        if missing:
            parts.append(f"missing {sorted(missing)}")
        if extra:
            parts.append(f"unknown {sorted(extra)}")
        raise FormatError(f"{what}: {', '.join(parts)}")


def read_manifest(path: PathLike) -> DatasetManifest:
    """Read and validate a manifest JSON file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    _require_keys(doc, {"task", "label_set", "items"}, f"{path}: manifest")
    task = doc["task"]
    if task not in (TASK_POSI, TASK_COLAB):
        raise FormatError(f"{path}: unknown task {task!r}")
    label_set = doc["label_set"]
    if not isinstance(label_set, list) or not all(isinstance(x, str) for x in label_set):
        raise FormatError(f"{path}: label_set must be a list of strings")
    raw_items = doc["items"]
    if not isinstance(raw_items, list):
        raise FormatError(f"{path}: items must be a list")
    items = []
    for i, raw in enumerate(raw_items):
        if not isinstance(raw, dict):
            raise FormatError(f"{path}: item {i} is not an object")
        if task == TASK_POSI:
            _require_keys(raw, {"sent", "tok", "surface", "gold"}, f"{path}: item {i}")
            items.append(
                PosiItem(int(raw["sent"]), int(raw["tok"]), str(raw["surface"]),
                         str(raw["gold"]))
            )
        else:
            _require_keys(raw, {"sent", "start", "end", "gold"}, f"{path}: item {i}")
            items.append(
                ColabItem(int(raw["sent"]), int(raw["start"]), int(raw["end"]),
                          str(raw["gold"]))
            )
    return DatasetManifest(task=task, label_set=tuple(label_set), items=tuple(items))


def write_vec_table(table: MorphTable, path: PathLike) -> None:
    """Write a morph table in the textual ``.vec`` format (sorted by key)."""
    lines = [f"{len(table.entries)} {table.dim}"]
    for key in sorted(table.entries):
        if any(ch.isspace() for ch in key):
            raise ValidationError(f"key {key!r} contains whitespace")
        vec = table.entries[key]
        lines.append(key + " " + " ".join(repr(float(x)) for x in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_vec_table(path: PathLike) -> MorphTable:
    """Parse a ``.vec`` text file into a MorphTable."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}: header must be '<count> <dim>'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise FormatError(f"{path}: non-integer header {header}") from exc
        if count < 0 or dim < 1:
            raise FormatError(f"{path}: bad header count={count} dim={dim}")
        entries: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise FormatError(
                    f"{path}:{lineno}: expected key plus {dim} floats, "
                    f"got {len(parts)} fields"
                )
            key = parts[0]
            if key in entries:
                raise FormatError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float32)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: unparseable float") from exc
            entries[key] = vec
    if len(entries) != count:
        raise FormatError(
            f"{path}: header declares {count} entries, file has {len(entries)}"
        )
    return MorphTable(dim=dim, entries=entries)


def load_dataset(
    semb_path: PathLike,
    manifest_path: PathLike,
    layer_subset: Union[Iterable[int], str, None] = None,
) -> Dataset:
    """Load a semb/manifest pair and pool the requested layers.

    ``layer_subset`` may be an iterable of layer indices, a selector
    string ("all" or a range like "4-7"), or None (all layers).
    """
    tensor = read_semb(semb_path)
    manifest = read_manifest(manifest_path)
    if tensor.n_items != len(manifest):
        raise AlignmentError(
            f"{semb_path} holds {tensor.n_items} items but {manifest_path} "
            f"lists {len(manifest)}"
        )
    matrix = pool_layers(tensor, parse_layer_spec(layer_subset, tensor.n_layers))
    return Dataset(matrix=matrix, manifest=manifest)


def parse_layer_spec(spec: Union[str, Sequence[int], None], n_layers: int) -> tuple[int, ...]:
    """Turn a layer selector ("all", "4-7", or a list of ints) into indices."""
    if spec is None or spec == "all":
        return tuple(range(n_layers))
    if isinstance(spec, str):
        if "-" in spec:
            lo, _, hi = spec.partition("-")
            try:
                return tuple(range(int(lo), int(hi) + 1))
            except ValueError as exc:
                raise ArgumentError(f"bad layer range {spec!r}") from exc
        try:
            return (int(spec),)
        except ValueError as exc:
            raise ArgumentError(f"bad layer spec {spec!r}") from exc
    return tuple(int(x) for x in spec)
