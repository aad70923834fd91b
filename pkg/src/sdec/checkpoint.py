"""Model checkpoints in the ``.sdec`` binary format.

Layout: magic ``SDEC``, little-endian u32 version (=1), u32 layer count,
then per layer u32 in_dim, u32 out_dim, u8 activation tag (0 identity,
1 relu), float32 LE weights row-major, float32 LE bias. The layer list is
the encoder followed by its mirrored decoder (equal halves). A cluster
model appends u32 m, u32 latent dim and m*latent float32 LE centers;
a plain stack ends after the layers.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dataio import PathLike
from .dec import ClusterModel
from .errors import CorruptionError, FormatError, UnsupportedVersionError
from .net import LinearLayer, Network
from .sae import EncoderStack

SDEC_MAGIC = b"SDEC"
SDEC_VERSION = 1
_ACT_TO_TAG = {"identity": 0, "relu": 1}
_TAG_TO_ACT = {v: k for k, v in _ACT_TO_TAG.items()}


def _pack_layer(layer: LinearLayer, act: str) -> bytes:
    head = struct.pack("<IIB", layer.in_dim, layer.out_dim, _ACT_TO_TAG[act])
    w = np.ascontiguousarray(layer.weights, dtype="<f4").tobytes()
    b = np.ascontiguousarray(layer.bias, dtype="<f4").tobytes()
    return head + w + b


def save_checkpoint(
    path: PathLike, stack: EncoderStack, centers: np.ndarray | None = None
) -> None:
    """Write a stack (and optionally cluster centers) to ``path``."""
    layers = list(stack.encoder.layers) + list(stack.decoder.layers)
    blob = SDEC_MAGIC + struct.pack("<II", SDEC_VERSION, len(layers))
    for layer, act in layers:
        blob += _pack_layer(layer, act)
    if centers is not None:
        m, latent = centers.shape
        blob += struct.pack("<II", m, latent)
        blob += np.ascontiguousarray(centers, dtype="<f4").tobytes()
    Path(path).write_bytes(blob)


def save_model(path: PathLike, model: ClusterModel) -> None:
    stack = EncoderStack(encoder=model.encoder, decoder=model.decoder)
    save_checkpoint(path, stack, centers=model.centers)


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw = raw
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.raw):
            raise CorruptionError(f"{self.path}: truncated checkpoint")
        out = self.raw[self.off : self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def f32s(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float32)

    @property
    def exhausted(self) -> bool:
        return self.off == len(self.raw)


def load_checkpoint(path: PathLike) -> tuple[EncoderStack, np.ndarray | None]:
    """Read a ``.sdec`` file back into a stack and optional centers."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != SDEC_MAGIC:
        raise FormatError(f"{path}: not a SDEC checkpoint")
    r = _Reader(raw, path)
    r.take(4)
    version = r.u32()
    if version != SDEC_VERSION:
        raise UnsupportedVersionError(f"{path}: version {version} not supported")
    n_layers = r.u32()
    if n_layers == 0 or n_layers % 2 != 0:
        raise FormatError(f"{path}: layer count {n_layers} is not a positive even number")
    layers = []
    for _ in range(n_layers):
        in_dim = r.u32()
        out_dim = r.u32()
        tag = r.u8()
        if tag not in _TAG_TO_ACT:
            raise FormatError(f"{path}: unknown activation tag {tag}")
        weights = r.f32s(in_dim * out_dim).reshape(out_dim, in_dim)
        bias = r.f32s(out_dim)
        layers.append((LinearLayer(weights=weights, bias=bias), _TAG_TO_ACT[tag]))
    half = n_layers // 2
    stack = EncoderStack(
        encoder=Network(layers=layers[:half]), decoder=Network(layers=layers[half:])
    )
    centers = None
    if not r.exhausted:
        m = r.u32()
        latent = r.u32()
        centers = r.f32s(m * latent).reshape(m, latent)
    if not r.exhausted:
        raise CorruptionError(f"{path}: trailing bytes after checkpoint payload")
    return stack, centers


def load_model(path: PathLike) -> ClusterModel:
    stack, centers = load_checkpoint(path)
    if centers is None:
        raise FormatError(f"{path}: checkpoint holds no cluster centers")
    return ClusterModel(encoder=stack.encoder, decoder=stack.decoder, centers=centers)
