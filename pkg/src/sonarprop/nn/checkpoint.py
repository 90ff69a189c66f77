"""Binary checkpoint format.

Layout, all integers unsigned 32-bit little-endian:

    magic "FLSN" | version | tensor count
    per tensor: name length | UTF-8 name | rank | dims... | float32 LE payload

Stored tensors are every trainable parameter, the batch-norm running
statistics, and two scalar metadata entries (meta/epochs_run,
meta/final_val_loss). Optimizer state is not persisted.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import CheckpointError
from .network import ObjectnessNet

MAGIC = b"FLSN"
VERSION = 1


def _named_tensors(net: ObjectnessNet) -> Dict[str, np.ndarray]:
    out = dict(net.parameters())
    out.update(net.running_stats())
    return out


def write_tensors(path, tensors: Dict[str, np.ndarray]) -> None:
    """Serialize a name -> tensor mapping in the checkpoint layout."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def save_checkpoint(
    net: ObjectnessNet,
    path,
    epochs_run: int = 0,
    final_val_loss: float = float("nan"),
) -> None:
    tensors = _named_tensors(net)
    tensors["meta/epochs_run"] = np.array([epochs_run], dtype=np.float32)
    tensors["meta/final_val_loss"] = np.array([final_val_loss], dtype=np.float32)
    write_tensors(path, tensors)


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_tensors(path) -> Dict[str, np.ndarray]:
    """Raw name -> tensor mapping from a checkpoint file."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    r = _Reader(data, path)
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}, expected {VERSION}")
    count = r.u32()
    tensors = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        if rank > 8:
            raise CheckpointError(f"{path}: implausible rank {rank} for {name}")
        dims = [r.u32() for _ in range(rank)]
        size = int(np.prod(dims)) if dims else 1
        payload = r.take(4 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)
    if r.pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - r.pos} trailing bytes")
    return tensors


def load_checkpoint(path) -> Tuple[ObjectnessNet, Dict[str, float]]:
    """Rebuild a network; returns (net, metadata)."""
    tensors = read_tensors(path)
    meta = {
        "epochs_run": float(tensors.pop("meta/epochs_run", np.array([0.0]))[0]),
        "final_val_loss": float(tensors.pop("meta/final_val_loss", np.array([np.nan]))[0]),
    }
    net = ObjectnessNet()
    expected = dict(net.parameters())
    expected.update(net.running_stats())
    missing = sorted(set(expected) - set(tensors))
    if missing:
        raise CheckpointError(f"{path}: missing tensors {missing[:3]}")
    extra = sorted(set(tensors) - set(expected))
    if extra:
        raise CheckpointError(f"{path}: unexpected tensors {extra[:3]}")
    for name, arr in tensors.items():
        if arr.shape != expected[name].shape:
            raise CheckpointError(
                f"{path}: {name} has shape {arr.shape}, expected {expected[name].shape}"
            )
        np.copyto(expected[name], arr)
    return net, meta
