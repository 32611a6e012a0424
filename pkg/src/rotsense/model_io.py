"""Bit-exact serialization of network models.

A model directory holds ``manifest.json`` plus one raw tensor file per
weight/bias. The manifest schema (format_version 1):

.. code-block:: json

    {
      "format_version": 1,
      "input_shape": [3, 64, 64],
      "layers": [
        {"kind": "conv", "out_channels": 96, "kernel": 7, "stride": 2,
         "padding": 2,
         "weight_file": "layer_0_weight.bin", "weight_shape": [96, 3, 7, 7],
         "bias_file": "layer_0_bias.bin", "bias_shape": [96]},
        {"kind": "relu"},
        {"kind": "maxpool", "kernel": 3, "stride": 2},
        {"kind": "flatten"},
        {"kind": "fully_connected", "out_features": 6, "...": "..."},
        {"kind": "dropout", "rate": 0.5}
      ]
    }

Tensor files are raw little-endian IEEE-754 float32, row-major (outermost
dimension slowest), with no header; the byte length must equal 4 times the
product of the declared shape. Tensors are widened to float64 in memory
for bound computation. This schema is the interchange contract for
external weight exporters.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .errors import (
    InvalidArgumentError,
    MissingTensorError,
    ModelFormatError,
    NonFiniteWeightError,
    ShapeMismatchError,
    UnknownLayerKindError,
    UnsupportedVersionError,
)
from .network import (
    Conv,
    Dropout,
    Flatten,
    FullyConnected,
    MaxPool,
    NetworkModel,
    ReLU,
    layer_output_shape,
)

FORMAT_VERSION = 1

_KIND_NAMES = {
    Conv: "conv",
    MaxPool: "maxpool",
    Flatten: "flatten",
    FullyConnected: "fully_connected",
    ReLU: "relu",
    Dropout: "dropout",
}


def _layer_entry(index, layer, weight, bias):
    if isinstance(layer, Conv):
        entry = {
            "kind": "conv",
            "out_channels": layer.out_channels,
            "kernel": layer.kernel,
            "stride": layer.stride,
            "padding": layer.padding,
        }
    elif isinstance(layer, MaxPool):
        entry = {"kind": "maxpool", "kernel": layer.kernel, "stride": layer.stride}
    elif isinstance(layer, Flatten):
        entry = {"kind": "flatten"}
    elif isinstance(layer, FullyConnected):
        entry = {"kind": "fully_connected", "out_features": layer.out_features}
    elif isinstance(layer, ReLU):
        entry = {"kind": "relu"}
    elif isinstance(layer, Dropout):
        entry = {"kind": "dropout", "rate": layer.rate}
    else:
        raise InvalidArgumentError(f"unknown layer kind {layer!r}")
    if weight is not None:
        entry["weight_file"] = f"layer_{index}_weight.bin"
        entry["weight_shape"] = list(weight.shape)
    if bias is not None:
        entry["bias_file"] = f"layer_{index}_bias.bin"
        entry["bias_shape"] = list(bias.shape)
    return entry


def save_model(model: NetworkModel, dir_path) -> str:
    """Write manifest.json plus one .bin per tensor; returns the manifest path."""
    os.makedirs(dir_path, exist_ok=True)
    entries = []
    for i, layer in enumerate(model.layers):
        weight, bias = model.weights[i], model.biases[i]
        entry = _layer_entry(i, layer, weight, bias)
        for tensor, key in ((weight, "weight_file"), (bias, "bias_file")):
            if tensor is not None:
                with open(os.path.join(dir_path, entry[key]), "wb") as fh:
                    fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
        entries.append(entry)
    manifest = {
        "format_version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "layers": entries,
    }
    manifest_path = os.path.join(dir_path, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path


def _read_tensor(dir_path, entry, which, index):
    name = entry.get(f"{which}_file")
    if name is None:
        return None
    shape = entry.get(f"{which}_shape")
    if not isinstance(shape, list) or not all(isinstance(d, int) and d >= 1 for d in shape):
        raise ShapeMismatchError(f"layer {index}: malformed {which}_shape {shape!r}")
    path = os.path.join(dir_path, name)
    if not os.path.isfile(path):
        raise MissingTensorError(f"layer {index}: tensor file {name!r} is missing")
    with open(path, "rb") as fh:
        raw = fh.read()
    expected = 4 * int(np.prod(shape))
    if len(raw) != expected:
        raise ShapeMismatchError(
            f"layer {index}: {which} file {name!r} holds {len(raw)} bytes, "
            f"expected {expected} for shape {shape}"
        )
    data = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    if not np.all(np.isfinite(data)):
        raise NonFiniteWeightError(f"layer {index}: {which} contains non-finite values")
    return data


def _parse_int(entry, key, index, minimum=1):
    value = entry.get(key)
    if not isinstance(value, int) or value < minimum:
        raise ModelFormatError(f"layer {index}: field {key!r} must be an integer >= {minimum}")
    return value


def load_model(manifest_path) -> NetworkModel:
    """Load and fully validate a model from its manifest."""
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise MissingTensorError(f"manifest {manifest_path!r} not found") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"manifest is not valid JSON: {exc}") from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format_version {version!r}")
    input_shape = manifest.get("input_shape")
    if not (isinstance(input_shape, list) and len(input_shape) == 3):
        raise ModelFormatError("input_shape must be a list of three integers")

    dir_path = os.path.dirname(os.path.abspath(manifest_path))
    layers, weights, biases = [], [], []
    for index, entry in enumerate(manifest.get("layers", [])):
        kind = entry.get("kind")
        if kind == "conv":
            layer = Conv(
                out_channels=_parse_int(entry, "out_channels", index),
                kernel=_parse_int(entry, "kernel", index),
                stride=_parse_int(entry, "stride", index),
                padding=_parse_int(entry, "padding", index, minimum=0),
            )
        elif kind == "maxpool":
            layer = MaxPool(
                kernel=_parse_int(entry, "kernel", index),
                stride=_parse_int(entry, "stride", index),
            )
        elif kind == "flatten":
            layer = Flatten()
        elif kind == "fully_connected":
            layer = FullyConnected(out_features=_parse_int(entry, "out_features", index))
        elif kind == "relu":
            layer = ReLU()
        elif kind == "dropout":
            rate = entry.get("rate", 0.5)
            if not isinstance(rate, (int, float)) or not 0.0 <= rate < 1.0:
                raise ModelFormatError(f"layer {index}: dropout rate {rate!r} out of range")
            layer = Dropout(rate=float(rate))
        else:
            raise UnknownLayerKindError(f"layer {index}: unknown kind {kind!r}")
        layers.append(layer)
        weights.append(_read_tensor(dir_path, entry, "weight", index))
        biases.append(_read_tensor(dir_path, entry, "bias", index))
    return NetworkModel(input_shape, layers, weights, biases)


# ---------------------------------------------------------------------------
# Reference architecture
# ---------------------------------------------------------------------------

def reference_layer_stack() -> list:
    """AlexNet-style pose network: five convolutions with interleaved 3/2
    max pooling, then two dropout-regularized 4096-wide hidden layers and a
    6-output pose head. Every conv/FC except the head is ReLU-activated."""
    return [
        Conv(96, 7, 2, 2),
        ReLU(),
        MaxPool(3, 2),
        Conv(128, 5, 1, 2),
        ReLU(),
        MaxPool(3, 2),
        Conv(192, 3, 1, 1),
        ReLU(),
        Conv(192, 3, 1, 1),
        ReLU(),
        Conv(128, 3, 1, 1),
        ReLU(),
        MaxPool(3, 2),
        Flatten(),
        FullyConnected(4096),
        ReLU(),
        Dropout(0.5),
        FullyConnected(4096),
        ReLU(),
        Dropout(0.5),
        FullyConnected(6),
    ]


def build_reference_architecture(input_shape, seed: int) -> NetworkModel:
    """Reference pose-network with seeded He-scaled random weights.

    Weights are generated as float32 (matching on-disk precision) and
    widened, so save -> load round-trips bit-exactly.
    """
    input_shape = tuple(int(d) for d in input_shape)
    if len(input_shape) != 3 or input_shape[0] != 3:
        raise InvalidArgumentError("reference architecture expects a 3-channel input")
    layers = reference_layer_stack()
    rng = np.random.default_rng(seed)
    shape = input_shape
    weights, biases = [], []
    for layer in layers:
        if isinstance(layer, Conv):
            fan_in = shape[0] * layer.kernel * layer.kernel
            w_shape = (layer.out_channels, shape[0], layer.kernel, layer.kernel)
        elif isinstance(layer, FullyConnected):
            fan_in = shape[0]
            w_shape = (layer.out_features, shape[0])
        else:
            weights.append(None)
            biases.append(None)
            shape = layer_output_shape(layer, shape)
            continue
        std = math.sqrt(2.0 / fan_in)
        w = (std * rng.standard_normal(w_shape, dtype=np.float32)).astype(np.float64)
        b = np.zeros(w_shape[0])
        weights.append(w)
        biases.append(b)
        shape = layer_output_shape(layer, shape)
    return NetworkModel(input_shape, layers, weights, biases)
