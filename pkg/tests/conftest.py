import numpy as np
import pytest

from rotsense import kernels
from rotsense.network import (
    Conv,
    Flatten,
    FullyConnected,
    MaxPool,
    NetworkModel,
    ReLU,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_unit_quats(rng, n):
    return kernels.random_unit_quats(rng, n)


@pytest.fixture
def quat_pairs(rng):
    """10^4 seeded uniform rotation pairs as unit quaternions."""
    q = random_unit_quats(rng, 20000)
    return q[:10000], q[10000:]


def random_pose_model(rng) -> NetworkModel:
    """Small random network (<= 4 layers) ending in a 6-output pose head."""
    input_shape = (int(rng.integers(1, 3)), 6, 6)
    template = rng.integers(0, 4)
    if template == 0:
        layers = [Flatten(), FullyConnected(6)]
    elif template == 1:
        layers = [Flatten(), FullyConnected(int(rng.integers(4, 12))), ReLU(), FullyConnected(6)]
    elif template == 2:
        layers = [Conv(int(rng.integers(1, 4)), 3, 1, 1), ReLU(), Flatten(), FullyConnected(6)]
    else:
        layers = [MaxPool(2, 2), Flatten(), FullyConnected(6)]

    shape = input_shape
    weights, biases = [], []
    from rotsense.network import layer_output_shape

    for layer in layers:
        if isinstance(layer, Conv):
            w = rng.standard_normal((layer.out_channels, shape[0], layer.kernel, layer.kernel))
            weights.append(w)
            biases.append(rng.standard_normal(layer.out_channels))
        elif isinstance(layer, FullyConnected):
            weights.append(rng.standard_normal((layer.out_features, shape[0])))
            biases.append(rng.standard_normal(layer.out_features))
        else:
            weights.append(None)
            biases.append(None)
        shape = layer_output_shape(layer, shape)
    return NetworkModel(input_shape, layers, weights, biases)
