"""Binary model container.

Layout::

    b"RWNN"                 magic
    uint32 LE               format version
    uint32 LE               manifest length in bytes
    manifest                UTF-8 JSON: model config + one record per tensor
                            (name, layer kind, role, shape, stride)
    float32 LE buffers      concatenated in manifest order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import BatchNorm2d, Conv2d, InvertedResidual, Layer, Linear, Sequential, Tensor

MAGIC = b"RWNN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _walk(layer: Layer, prefix: str) -> Iterator[tuple[str, Layer]]:
    if isinstance(layer, Sequential):
        for i, sub in enumerate(layer.layers):
            yield from _walk(sub, f"{prefix}{i}.")
    elif isinstance(layer, InvertedResidual):
        yield from _walk(layer.body, prefix)
    elif hasattr(layer, "net") and isinstance(layer.net, Sequential):
        yield from _walk(layer.net, prefix)
    else:
        yield prefix.rstrip("."), layer


def tensor_manifest(model: Layer) -> list[tuple[dict, Tensor]]:
    """Every parameter and buffer of ``model`` with its manifest record, in a fixed order."""
    out = []
    for name, layer in _walk(model, ""):
        if isinstance(layer, Conv2d):
            roles = [("weight", layer.weight)] + ([("bias", layer.bias)] if layer.bias is not None else [])
            kind, stride = layer.kind, layer.stride
        elif isinstance(layer, BatchNorm2d):
            roles = [("gamma", layer.gamma), ("beta", layer.beta),
                     ("running_mean", layer.running_mean), ("running_var", layer.running_var)]
            kind, stride = "BatchNorm", 1
        elif isinstance(layer, Linear):
            roles = [("weight", layer.weight), ("bias", layer.bias)]
            kind, stride = "Linear", 1
        else:
            continue
        for role, t in roles:
            out.append(({"name": f"{name}.{role}", "kind": kind, "role": role,
                         "shape": list(t.shape), "stride": stride}, t))
    return out


def save(model: Layer, path: str | Path, config: dict | None = None) -> None:
    entries = tensor_manifest(model)
    manifest = json.dumps({"config": config or {}, "tensors": [rec for rec, _ in entries]},
                          sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(manifest)) + manifest)
        for _, t in entries:
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def read_manifest(path: str | Path) -> tuple[dict, int]:
    """The decoded manifest and the byte offset where the float buffers start."""
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != MAGIC:
            raise CheckpointError(f"{path}: not a model checkpoint")
        version, n = struct.unpack("<II", head[4:])
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        raw = fh.read(n)
    if len(raw) != n:
        raise CheckpointError(f"{path}: truncated manifest")
    return json.loads(raw.decode("utf-8")), 12 + n


def load_into(model: Layer, path: str | Path) -> dict:
    """Fill ``model``'s tensors from ``path``; the manifest must match the model exactly."""
    manifest, offset = read_manifest(path)
    entries = tensor_manifest(model)
    records = manifest["tensors"]
    if [r for r, _ in entries] != records:
        raise CheckpointError(f"{path}: layer manifest does not match the model")
    blob = Path(path).read_bytes()[offset:]
    pos = 0
    for rec, t in entries:
        count = int(np.prod(rec["shape"]))
        chunk = blob[pos:pos + 4 * count]
        if len(chunk) != 4 * count:
            raise CheckpointError(f"{path}: truncated buffer for {rec['name']}")
        t.data = np.frombuffer(chunk, dtype="<f4").reshape(rec["shape"]).astype(t.data.dtype)
        pos += 4 * count
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return manifest["config"]
