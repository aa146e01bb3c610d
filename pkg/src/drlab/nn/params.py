"""Named parameter tensors with a flat-vector view and a binary checkpoint format.

Checkpoint layout (all integers little-endian)::

    magic      8 bytes   b"DRLCKPT1"
    count      uint32    number of tensors
    repeated count times:
        name_len   uint16
        name       name_len bytes, UTF-8
        ndim       uint8
        dims       ndim x uint64
        data       prod(dims) x float64 ('<f8'), C order

Tensors are written in store order, which is also the flat-view order.
"""
from __future__ import annotations

import struct
from typing import Dict, Iterable, Tuple

import numpy as np

MAGIC = b"DRLCKPT1"


class ParamStore:
    """Ordered ``name -> float64 array`` mapping whose shapes never change."""

    def __init__(self, arrays: Dict[str, np.ndarray] | Iterable[Tuple[str, np.ndarray]]):
        items = arrays.items() if isinstance(arrays, dict) else arrays
        self._arrays = {k: np.array(v, dtype=np.float64) for k, v in items}

    # mapping protocol
    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        if name not in self._arrays:
            raise KeyError(f"unknown parameter {name!r}")
        if value.shape != self._arrays[name].shape:
            raise ValueError(f"{name}: shape {value.shape} != {self._arrays[name].shape}")
        self._arrays[name][...] = value

    def __contains__(self, name) -> bool:
        return name in self._arrays

    def __iter__(self):
        return iter(self._arrays)

    def __len__(self):
        return len(self._arrays)

    def names(self):
        return list(self._arrays)

    def items(self):
        return self._arrays.items()

    def shapes(self):
        return {k: v.shape for k, v in self._arrays.items()}

    @property
    def size(self) -> int:
        return sum(v.size for v in self._arrays.values())

    # flat view
    def flatten(self) -> np.ndarray:
        if not self._arrays:
            return np.zeros(0)
        return np.concatenate([v.ravel() for v in self._arrays.values()])

    def unflatten(self, vec: np.ndarray) -> "ParamStore":
        """New store with this store's layout filled from ``vec``."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise ValueError(f"flat vector has shape {vec.shape}, expected ({self.size},)")
        out, i = {}, 0
        for k, v in self._arrays.items():
            out[k] = vec[i:i + v.size].reshape(v.shape)
            i += v.size
        return ParamStore(out)

    def assign_flat(self, vec: np.ndarray) -> None:
        src = self.unflatten(vec)
        for k in self._arrays:
            self._arrays[k][...] = src[k]

    def copy(self) -> "ParamStore":
        return ParamStore({k: v.copy() for k, v in self._arrays.items()})

    def zeros_like(self) -> "ParamStore":
        return ParamStore({k: np.zeros_like(v) for k, v in self._arrays.items()})

    def assign(self, other: "ParamStore") -> None:
        for k in self._arrays:
            self[k] = other[k]

    def equal(self, other: "ParamStore") -> bool:
        return (self.names() == other.names()
                and all(np.array_equal(self[k], other[k]) for k in self._arrays))

    def __repr__(self):
        body = ", ".join(f"{k}{tuple(v.shape)}" for k, v in self._arrays.items())
        return f"ParamStore({body})"


def save_checkpoint(params: ParamStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for name, arr in params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> ParamStore:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    pos = 8
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        dims = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        n = int(np.prod(dims, dtype=np.int64))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(dims).copy()
        pos += 8 * n
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return ParamStore(arrays)
