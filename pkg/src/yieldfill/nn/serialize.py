"""Flat binary model files.

Layout (all little-endian):

    magic   b"YFN1"
    u32     input-shape rank, then u32 per dimension
    u32     layer count
    per layer: u8 kind tag, u8 arg count, i32 per arg
    parameter and buffer tensors as raw float64, in flattening order
    (layer order; within a layer: parameters, then buffers)

Tensor shapes are implied by the layer records, so the payload is exactly
the numbers. Round trips are byte-identical. Training metadata (seed,
config, scaling) lives in a JSON sidecar written by the model-level save,
not here.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..exceptions import DataError
from . import layers as L
from .network import Network

__all__ = ["save_network", "load_network"]

_MAGIC = b"YFN1"

_TAGS = {
    "dense": 1,
    "conv3x3": 2,
    "maxpool2x2": 3,
    "upsample2x2": 4,
    "batchnorm": 5,
    "relu": 6,
    "sigmoid": 7,
    "crop": 8,
    "pad": 9,
    "flatten": 10,
    "reshape": 11,
}

_BUILDERS = {
    "dense": lambda args: L.Dense(args[0], args[1]),
    "conv3x3": lambda args: L.Conv3x3(args[0], args[1]),
    "maxpool2x2": lambda args: L.MaxPool2x2(),
    "upsample2x2": lambda args: L.Upsample2x2(),
    "batchnorm": lambda args: L.BatchNorm(args[0]),
    "relu": lambda args: L.ReLU(),
    "sigmoid": lambda args: L.Sigmoid(),
    "crop": lambda args: L.Crop(args[0], args[1]),
    "pad": lambda args: L.Pad(args[0], args[1]),
    "flatten": lambda args: L.Flatten(),
    "reshape": lambda args: L.Reshape(args[0], args[1], args[2]),
}

_KIND_BY_TAG = {tag: kind for kind, tag in _TAGS.items()}


def save_network(net: Network, path) -> None:
    path = Path(path)
    chunks = [_MAGIC]
    chunks.append(struct.pack("<I", len(net.input_shape)))
    chunks.append(struct.pack(f"<{len(net.input_shape)}I", *net.input_shape))
    chunks.append(struct.pack("<I", len(net.layers)))
    for layer in net.layers:
        kind, *args = layer.config()
        chunks.append(struct.pack("<BB", _TAGS[kind], len(args)))
        if args:
            chunks.append(struct.pack(f"<{len(args)}i", *args))
    for layer in net.layers:
        for arr in list(layer.params) + list(layer.buffers):
            chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    path.write_bytes(b"".join(chunks))


def load_network(path) -> Network:
    path = Path(path)
    blob = path.read_bytes()
    view = memoryview(blob)
    offset = 0

    def take(fmt):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise DataError(f"model file {path} is truncated")
        values = struct.unpack_from(fmt, view, offset)
        offset += size
        return values

    if bytes(view[:4]) != _MAGIC:
        raise DataError(f"{path} is not a model file (bad magic)")
    offset = 4
    (rank,) = take("<I")
    input_shape = take(f"<{rank}I")
    (n_layers,) = take("<I")
    built = []
    for _ in range(n_layers):
        tag, n_args = take("<BB")
        args = take(f"<{n_args}i") if n_args else ()
        kind = _KIND_BY_TAG.get(tag)
        if kind is None:
            raise DataError(f"{path}: unknown layer tag {tag}")
        built.append(_BUILDERS[kind](args))
    for layer in built:
        for arr in list(layer.params) + list(layer.buffers):
            nbytes = arr.size * 8
            if offset + nbytes > len(blob):
                raise DataError(f"model file {path} is truncated")
            arr[...] = np.frombuffer(view, dtype="<f8", count=arr.size, offset=offset).reshape(
                arr.shape
            )
            offset += nbytes
    if offset != len(blob):
        raise DataError(f"model file {path} has {len(blob) - offset} trailing bytes")
    return Network(built, tuple(int(d) for d in input_shape))
