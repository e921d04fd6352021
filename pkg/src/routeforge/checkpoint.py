"""Binary model checkpoints.

Layout: magic "RFMLP\\0", format version u16, layer count u16, then per layer
in_dim u32, out_dim u32, activation u8, weights row-major f64, bias f64, and a
trailing CRC32 of everything after the magic. All integers little-endian.
"""

from __future__ import annotations

import os

import numpy as np

from .binio import PayloadReader, PayloadWriter
from .errors import VersionError
from .nn import Activation, DenseLayer, MlpModel, validate_model

MAGIC = b"RFMLP\0"
FORMAT_VERSION = 1


def write_checkpoint(model: MlpModel, path: str | os.PathLike) -> None:
    validate_model(model)
    with open(path, "wb") as f:
        w = PayloadWriter(f, MAGIC)
        w.u16(FORMAT_VERSION)
        w.u16(len(model.layers))
        for layer in model.layers:
            w.u32(layer.in_dim)
            w.u32(layer.out_dim)
            w.u8(layer.activation.value)
            w.array(layer.weights)
            w.array(layer.bias)
        w.finish()


def read_checkpoint(path: str | os.PathLike) -> MlpModel:
    with open(path, "rb") as f:
        data = f.read()
    r = PayloadReader(data, MAGIC, source=str(path))
    version = r.u16()
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: checkpoint version {version}, reader supports {FORMAT_VERSION}")
    n_layers = r.u16()
    layers = []
    for _ in range(n_layers):
        in_dim = r.u32()
        out_dim = r.u32()
        activation = Activation(r.u8())
        weights = r.array(in_dim * out_dim, "<f8").reshape(out_dim, in_dim)
        bias = r.array(out_dim, "<f8")
        layers.append(DenseLayer(weights, bias, activation))
    r.expect_end()
    r.verify_crc()
    model = MlpModel(layers=layers, input_dim=layers[0].in_dim if layers else 0)
    validate_model(model)
    return model
