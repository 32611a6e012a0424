"""Feedforward pose-network model and provable sensitivity bounds.

The Euclidean Lipschitz constant of a network is intractable to compute
exactly, but the product of per-layer operator-norm bounds is a valid
upper bound. Combining that product with the distance ratio constant of
the output rotation parameterization bounds the rotational Lipschitz
constant: L_r <= mu * L_e.

Per-layer bounds:

- convolution / fully connected: exact operator 2-norm by power iteration
  (biases shift outputs and contribute nothing to a Lipschitz constant);
- ReLU, flatten, dropout (inference): 1;
- max pooling with kernel k and stride s: sqrt(m) with m = ceil(k/s)^2.
  Each output picks one input in its window and each input lands in at
  most m windows, so ||pool(x)-pool(y)||^2 <= m ||x-y||^2. Possibly loose,
  always valid.

Iterative spectral estimates are inflated by (1 + tol) before they enter a
report, so the published product remains an upper bound despite truncated
iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distance_ratio import Parameterization, analytic_mu
from .errors import InvalidArgumentError, ShapeMismatchError, UnboundedConstantError
from .spectral import DEFAULT_TOL, ConvOperator, spectral_norm_conv, spectral_norm_dense


# ---------------------------------------------------------------------------
# Layer specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.out_channels < 1 or self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise InvalidArgumentError("invalid convolution hyperparameters")


@dataclass(frozen=True)
class MaxPool:
    kernel: int
    stride: int

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1:
            raise InvalidArgumentError("invalid pooling hyperparameters")


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class FullyConnected:
    out_features: int

    def __post_init__(self):
        if self.out_features < 1:
            raise InvalidArgumentError("out_features must be >= 1")


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Dropout:
    rate: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.rate < 1.0):
            raise InvalidArgumentError("dropout rate must lie in [0, 1)")


LayerSpec = Conv | MaxPool | Flatten | FullyConnected | ReLU | Dropout


def layer_output_shape(layer: LayerSpec, in_shape: tuple) -> tuple:
    """Activation shape after one layer; raises when the layer cannot apply."""
    if isinstance(layer, Conv):
        if len(in_shape) != 3:
            raise InvalidArgumentError("convolution expects a (c, h, w) input")
        c, h, w = in_shape
        h_out = (h + 2 * layer.padding - layer.kernel) // layer.stride + 1
        w_out = (w + 2 * layer.padding - layer.kernel) // layer.stride + 1
        if h_out < 1 or w_out < 1 or layer.kernel > min(h, w) + 2 * layer.padding:
            raise InvalidArgumentError("input too small for convolution kernel")
        return (layer.out_channels, h_out, w_out)
    if isinstance(layer, MaxPool):
        if len(in_shape) != 3:
            raise InvalidArgumentError("max pooling expects a (c, h, w) input")
        c, h, w = in_shape
        h_out = (h - layer.kernel) // layer.stride + 1
        w_out = (w - layer.kernel) // layer.stride + 1
        if h_out < 1 or w_out < 1 or layer.kernel > min(h, w):
            raise InvalidArgumentError("input too small for pooling kernel")
        return (c, h_out, w_out)
    if isinstance(layer, Flatten):
        return (int(np.prod(in_shape)),)
    if isinstance(layer, FullyConnected):
        if len(in_shape) != 1:
            raise InvalidArgumentError("fully connected layer expects a flat input")
        return (layer.out_features,)
    if isinstance(layer, (ReLU, Dropout)):
        return in_shape
    raise InvalidArgumentError(f"unknown layer kind {layer!r}")


def _expected_weight_shape(layer: LayerSpec, in_shape: tuple):
    if isinstance(layer, Conv):
        return (layer.out_channels, in_shape[0], layer.kernel, layer.kernel), (layer.out_channels,)
    if isinstance(layer, FullyConnected):
        return (layer.out_features, in_shape[0]), (layer.out_features,)
    return None, None


class NetworkModel:
    """Immutable ordered layer stack with weights, shape-checked end to end.

    ``weights[i]`` / ``biases[i]`` belong to ``layers[i]`` and are None for
    layers without parameters. Biases are optional for parameterized
    layers.
    """

    def __init__(self, input_shape, layers, weights, biases=None):
        input_shape = tuple(int(d) for d in input_shape)
        if len(input_shape) != 3 or any(d < 1 for d in input_shape):
            raise InvalidArgumentError("input_shape must be (channels, height, width), all >= 1")
        layers = tuple(layers)
        weights = list(weights)
        biases = list(biases) if biases is not None else [None] * len(layers)
        if len(weights) != len(layers) or len(biases) != len(layers):
            raise InvalidArgumentError("weights and biases must align with layers")

        shapes = [input_shape]
        for i, layer in enumerate(layers):
            expected_w, expected_b = _expected_weight_shape(layer, shapes[-1])
            if expected_w is None:
                if weights[i] is not None or biases[i] is not None:
                    raise ShapeMismatchError(f"layer {i} ({type(layer).__name__}) takes no weights")
            else:
                if weights[i] is None:
                    raise ShapeMismatchError(f"layer {i} ({type(layer).__name__}) requires weights")
                weights[i] = np.asarray(weights[i], dtype=np.float64)
                if weights[i].shape != expected_w:
                    raise ShapeMismatchError(
                        f"layer {i} weight shape {weights[i].shape} != expected {expected_w}"
                    )
                if not np.all(np.isfinite(weights[i])):
                    raise InvalidArgumentError(f"layer {i} weights must be finite")
                if biases[i] is not None:
                    biases[i] = np.asarray(biases[i], dtype=np.float64)
                    if biases[i].shape != expected_b:
                        raise ShapeMismatchError(
                            f"layer {i} bias shape {biases[i].shape} != expected {expected_b}"
                        )
                    if not np.all(np.isfinite(biases[i])):
                        raise InvalidArgumentError(f"layer {i} biases must be finite")
            shapes.append(layer_output_shape(layer, shapes[-1]))

        self.input_shape = input_shape
        self.layers = layers
        self.weights = tuple(weights)
        self.biases = tuple(biases)
        self.activation_shapes = tuple(shapes)

    @property
    def output_shape(self) -> tuple:
        return self.activation_shapes[-1]


def forward(model: NetworkModel, x) -> np.ndarray:
    """Deterministic inference pass; dropout acts as the identity."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.input_shape:
        raise InvalidArgumentError(f"input shape {x.shape} != model input {model.input_shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("input must be finite")
    for i, layer in enumerate(model.layers):
        if isinstance(layer, Conv):
            op = ConvOperator(model.weights[i], layer.stride, layer.padding, x.shape)
            x = op.forward(x)
            if model.biases[i] is not None:
                x = x + model.biases[i][:, None, None]
        elif isinstance(layer, MaxPool):
            from numpy.lib.stride_tricks import sliding_window_view

            win = sliding_window_view(x, (layer.kernel, layer.kernel), axis=(1, 2))
            x = win[:, :: layer.stride, :: layer.stride].max(axis=(-2, -1))
        elif isinstance(layer, Flatten):
            x = x.reshape(-1)
        elif isinstance(layer, FullyConnected):
            x = model.weights[i] @ x
            if model.biases[i] is not None:
                x = x + model.biases[i]
        elif isinstance(layer, ReLU):
            x = np.maximum(x, 0.0)
        elif isinstance(layer, Dropout):
            pass
        else:
            raise InvalidArgumentError(f"unknown layer kind {layer!r}")
    return x


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerBound:
    index: int
    bound: float
    method: str


@dataclass(frozen=True)
class LipschitzReport:
    """Per-layer Euclidean Lipschitz bounds and their product."""

    subnet: str
    per_layer: tuple[LayerBound, ...]
    product_bound: float

    def to_json_dict(self) -> dict:
        return {
            "subnet": self.subnet,
            "per_layer": [
                {"index": lb.index, "bound": lb.bound, "method": lb.method}
                for lb in self.per_layer
            ],
            "product_bound": self.product_bound,
        }


@dataclass(frozen=True)
class RotationalBound:
    """Rotational Lipschitz bound L_r <= mu * L_e, optionally applied to an
    input radius epsilon to bound the output rotational distance."""

    L_e_bound: float
    mu: float
    L_r_bound: float
    epsilon: float | None = None
    output_radius: float | None = None
    useful: bool | None = None

    def to_json_dict(self) -> dict:
        d = {"L_e_bound": self.L_e_bound, "mu": self.mu, "L_r_bound": self.L_r_bound}
        if self.epsilon is not None:
            d["epsilon"] = self.epsilon
            d["output_radius"] = self.output_radius
            d["useful"] = self.useful
        return d


def maxpool_bound(layer: MaxPool) -> float:
    m = math.ceil(layer.kernel / layer.stride) ** 2
    return math.sqrt(m)


def layer_lipschitz_bound(
    layer: LayerSpec, weight, input_shape, tol: float = DEFAULT_TOL
) -> tuple[float, str]:
    """Euclidean Lipschitz bound of a single layer and its method label."""
    if isinstance(layer, Conv):
        est = spectral_norm_conv(weight, layer.stride, layer.padding, input_shape, tol)
        return est.value * (1.0 + tol), "power-iteration"
    if isinstance(layer, FullyConnected):
        est = spectral_norm_dense(weight, tol)
        return est.value * (1.0 + tol), "power-iteration"
    if isinstance(layer, ReLU):
        return 1.0, "nonexpansive"
    if isinstance(layer, Flatten):
        return 1.0, "isometry"
    if isinstance(layer, Dropout):
        return 1.0, "inference-identity"
    if isinstance(layer, MaxPool):
        return maxpool_bound(layer), "window-multiplicity"
    raise InvalidArgumentError(f"unknown layer kind {layer!r}")


def network_euclidean_bound(
    model: NetworkModel, tol: float = DEFAULT_TOL, subnet: str = "full"
) -> LipschitzReport:
    """Upper bound on the network's Euclidean Lipschitz constant: the
    product of per-layer bounds, reported layer by layer."""
    per_layer = []
    product = 1.0
    for i, layer in enumerate(model.layers):
        bound, method = layer_lipschitz_bound(
            layer, model.weights[i], model.activation_shapes[i], tol
        )
        per_layer.append(LayerBound(i, bound, method))
        product *= bound
    return LipschitzReport(subnet=subnet, per_layer=tuple(per_layer), product_bound=product)


def split_pose_head(model: NetworkModel) -> tuple[NetworkModel, NetworkModel]:
    """Split a pose network with a 6-output final layer into position and
    rotation sub-networks (first three rows / last three rows)."""
    if not model.layers or not isinstance(model.layers[-1], FullyConnected):
        raise InvalidArgumentError("final layer must be fully connected")
    if model.layers[-1].out_features != 6:
        raise InvalidArgumentError("pose head split requires a 6-output final layer")
    w = model.weights[-1]
    b = model.biases[-1]

    def subnet(rows):
        layers = model.layers[:-1] + (FullyConnected(3),)
        weights = model.weights[:-1] + (w[rows].copy(),)
        biases = model.biases[:-1] + (b[rows].copy() if b is not None else None,)
        return NetworkModel(model.input_shape, layers, weights, biases)

    return subnet(slice(0, 3)), subnet(slice(3, 6))


def rotational_bound(L_e: float, p: Parameterization) -> RotationalBound:
    """Theorem-level bound on the rotational Lipschitz constant."""
    if L_e < 0.0:
        raise InvalidArgumentError("L_e must be nonnegative")
    mu = analytic_mu(p)
    if math.isinf(mu):
        raise UnboundedConstantError(
            f"{p.value} has an infinite distance ratio constant; no finite rotational bound exists"
        )
    return RotationalBound(L_e_bound=L_e, mu=mu, L_r_bound=mu * L_e)


def perturbation_bound(epsilon: float, L_e: float, p: Parameterization) -> RotationalBound:
    """Output rotational-distance bound for inputs within Euclidean
    distance epsilon. The bound is only informative when it is below the
    maximum possible rotational distance pi; the ``useful`` flag records
    that."""
    if epsilon < 0.0:
        raise InvalidArgumentError("epsilon must be nonnegative")
    base = rotational_bound(L_e, p)
    radius = epsilon * base.L_r_bound
    return RotationalBound(
        L_e_bound=base.L_e_bound,
        mu=base.mu,
        L_r_bound=base.L_r_bound,
        epsilon=epsilon,
        output_radius=radius,
        useful=bool(radius < math.pi),
    )


def inverse_perturbation(target: float, L_e: float, p: Parameterization) -> tuple[float, bool]:
    """Largest input radius guaranteeing an output rotational distance of at
    most ``target``. Returns ``(epsilon, unbounded)``; when L_e == 0 every
    radius is admissible and epsilon is infinite."""
    if not (0.0 < target <= math.pi):
        raise InvalidArgumentError("target must lie in (0, pi]")
    base = rotational_bound(L_e, p)
    if base.L_r_bound == 0.0:
        return math.inf, True
    return target / base.L_r_bound, False
