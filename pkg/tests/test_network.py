"""Network model, forward pass, and the Lipschitz bound pipeline."""

import math

import numpy as np
import pytest

from conftest import random_pose_model
from rotsense import kernels
from rotsense.distance_ratio import Parameterization
from rotsense.errors import (
    InvalidArgumentError,
    ShapeMismatchError,
    UnboundedConstantError,
)
from rotsense.network import (
    Conv,
    Dropout,
    Flatten,
    FullyConnected,
    MaxPool,
    NetworkModel,
    ReLU,
    forward,
    inverse_perturbation,
    layer_lipschitz_bound,
    maxpool_bound,
    network_euclidean_bound,
    perturbation_bound,
    rotational_bound,
    split_pose_head,
)

EXP_U = Parameterization.EXP_COORDS_UNCONSTRAINED
QUAT = Parameterization.QUATERNION
QUAT_U = Parameterization.QUATERNION_UNCONSTRAINED


def vector_model(fc_weights):
    """Stack of FC layers on a flattened (n, 1, 1) input."""
    n = fc_weights[0].shape[1]
    layers = [Flatten()]
    weights = [None]
    for w in fc_weights:
        layers.append(FullyConnected(w.shape[0]))
        weights.append(w)
    return NetworkModel((n, 1, 1), layers, weights)


class TestModelValidation:
    def test_rejects_weight_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            NetworkModel((4, 1, 1), [Flatten(), FullyConnected(3)], [None, np.ones((3, 5))])

    def test_rejects_weights_on_parameterless_layer(self):
        with pytest.raises(ShapeMismatchError):
            NetworkModel((1, 4, 4), [ReLU()], [np.ones((2, 2))])

    def test_rejects_nonfinite_weights(self):
        with pytest.raises(InvalidArgumentError):
            NetworkModel(
                (4, 1, 1), [Flatten(), FullyConnected(2)], [None, np.full((2, 4), np.nan)]
            )

    def test_rejects_undersized_input(self):
        with pytest.raises(InvalidArgumentError):
            NetworkModel((1, 2, 2), [MaxPool(3, 2)], [None])


class TestForward:
    def test_zero_weights_give_zero_output(self):
        model = vector_model([np.zeros((3, 4))])
        assert np.all(forward(model, np.ones((4, 1, 1))) == 0.0)

    def test_identity_fc_returns_flattened_input(self, rng):
        model = vector_model([np.eye(6)])
        x = rng.standard_normal((6, 1, 1))
        np.testing.assert_array_equal(forward(model, x), x.reshape(-1))

    def test_relu_and_bias(self):
        layers = [Flatten(), FullyConnected(2), ReLU()]
        w = np.array([[1.0, 0.0], [0.0, 1.0]])
        b = np.array([-10.0, 1.0])
        model = NetworkModel((2, 1, 1), layers, [None, w, None], [None, b, None])
        out = forward(model, np.array([2.0, 3.0]).reshape(2, 1, 1))
        np.testing.assert_array_equal(out, [0.0, 4.0])

    def test_maxpool_and_dropout(self):
        layers = [MaxPool(2, 2), Dropout(0.5), Flatten()]
        model = NetworkModel((1, 4, 4), layers, [None] * 3)
        x = np.arange(16.0).reshape(1, 4, 4)
        np.testing.assert_array_equal(forward(model, x), [5.0, 7.0, 13.0, 15.0])

    def test_shape_mismatch_rejected(self):
        model = vector_model([np.eye(4)])
        with pytest.raises(InvalidArgumentError):
            forward(model, np.ones((5, 1, 1)))


class TestLayerBounds:
    def test_relu_flatten_dropout_are_one(self):
        assert layer_lipschitz_bound(ReLU(), None, (4,)) == (1.0, "nonexpansive")
        assert layer_lipschitz_bound(Flatten(), None, (1, 2, 2))[0] == 1.0
        assert layer_lipschitz_bound(Dropout(0.3), None, (4,))[0] == 1.0

    def test_maxpool_overlapping_windows(self):
        assert maxpool_bound(MaxPool(3, 2)) == 2.0

    def test_maxpool_disjoint_windows(self):
        assert maxpool_bound(MaxPool(2, 2)) == 1.0

    def test_maxpool_empirical_ratio_never_exceeds_bound(self, rng):
        model = NetworkModel((1, 9, 9), [MaxPool(3, 2)], [None])
        bound = maxpool_bound(MaxPool(3, 2))
        worst = 0.0
        for _ in range(2000):
            x = rng.standard_normal((1, 9, 9))
            y = x + rng.standard_normal((1, 9, 9)) * 10.0 ** rng.uniform(-3, 1)
            num = np.linalg.norm(forward(model, x) - forward(model, y))
            den = np.linalg.norm(x - y)
            worst = max(worst, num / den)
        assert worst <= bound + 1e-12


class TestNetworkBound:
    def test_product_of_diagonal_layers(self):
        model = NetworkModel(
            (3, 1, 1),
            [Flatten(), FullyConnected(3), ReLU(), FullyConnected(3)],
            [None, 2.0 * np.eye(3), None, 3.0 * np.eye(3)],
        )
        report = network_euclidean_bound(model)
        assert abs(report.product_bound - 6.0) <= 1e-6
        assert [lb.method for lb in report.per_layer] == [
            "isometry",
            "power-iteration",
            "nonexpansive",
            "power-iteration",
        ]

    def test_single_conv_layer_equals_spectral_norm(self, rng):
        from rotsense.spectral import spectral_norm_conv

        w = rng.standard_normal((2, 1, 3, 3))
        model = NetworkModel((1, 6, 6), [Conv(2, 3, 1, 1)], [w], [None])
        report = network_euclidean_bound(model, tol=1e-9)
        direct = spectral_norm_conv(w, 1, 1, (1, 6, 6), tol=1e-9).value * (1 + 1e-9)
        assert report.product_bound == direct

    def test_product_equals_per_layer_product(self, rng):
        model = random_pose_model(rng)
        report = network_euclidean_bound(model)
        prod = 1.0
        for lb in report.per_layer:
            prod *= lb.bound
        assert report.product_bound == prod

    def test_tightness_on_aligned_diagonal_layers(self):
        w1 = np.diag([3.0, 2.0, 1.0])
        w2 = np.diag([5.0, 4.0, 0.5])
        model = vector_model([w1, w2])
        report = network_euclidean_bound(model)
        true_norm = float(np.linalg.svd(w2 @ w1, compute_uv=False)[0])
        assert abs(report.product_bound - true_norm) <= 1e-8 * true_norm

    def test_deterministic_reports(self, rng):
        model = random_pose_model(rng)
        r1 = network_euclidean_bound(model, tol=1e-9)
        r2 = network_euclidean_bound(model, tol=1e-9)
        assert r1 == r2


class TestSplitPoseHead:
    def test_row_partition(self, rng):
        model = random_pose_model(rng)
        position, rotation = split_pose_head(model)
        w = model.weights[-1]
        np.testing.assert_array_equal(position.weights[-1], w[0:3])
        np.testing.assert_array_equal(rotation.weights[-1], w[3:6])
        np.testing.assert_array_equal(
            np.vstack([position.weights[-1], rotation.weights[-1]]), w
        )
        np.testing.assert_array_equal(
            np.concatenate([position.biases[-1], rotation.biases[-1]]), model.biases[-1]
        )

    def test_subnet_outputs_partition_full_output(self, rng):
        model = random_pose_model(rng)
        position, rotation = split_pose_head(model)
        x = rng.standard_normal(model.input_shape)
        full = forward(model, x)
        np.testing.assert_allclose(forward(position, x), full[:3], atol=1e-12)
        np.testing.assert_allclose(forward(rotation, x), full[3:], atol=1e-12)

    def test_subnet_bounds_below_full_bound(self, rng):
        for _ in range(5):
            model = random_pose_model(rng)
            full = network_euclidean_bound(model).product_bound
            position, rotation = split_pose_head(model)
            tol = 1e-9
            assert network_euclidean_bound(position).product_bound <= full * (1 + tol)
            assert network_euclidean_bound(rotation).product_bound <= full * (1 + tol)

    def test_row_submatrix_norm_never_exceeds_full(self, rng):
        for _ in range(10):
            w = rng.standard_normal((6, 8))
            full = np.linalg.svd(w, compute_uv=False)[0]
            assert np.linalg.svd(w[3:6], compute_uv=False)[0] <= full + 1e-12

    def test_requires_six_output_fc(self, rng):
        model = vector_model([np.ones((4, 5))])
        with pytest.raises(InvalidArgumentError):
            split_pose_head(model)
        conv_only = NetworkModel((1, 5, 5), [Conv(1, 3)], [np.ones((1, 1, 3, 3))])
        with pytest.raises(InvalidArgumentError):
            split_pose_head(conv_only)


class TestSoundness:
    def test_empirical_ratios_never_exceed_bounds(self, rng):
        for _ in range(5):
            model = random_pose_model(rng)
            report = network_euclidean_bound(model)
            _, rotation = split_pose_head(model)
            rot_bound = network_euclidean_bound(rotation).product_bound
            for _ in range(200):
                x1 = rng.standard_normal(model.input_shape)
                x2 = x1 + rng.standard_normal(model.input_shape) * 10.0 ** rng.uniform(-4, 1)
                dx = float(np.linalg.norm(x2 - x1))
                f1, f2 = forward(model, x1), forward(model, x2)
                assert np.linalg.norm(f2 - f1) / dx <= report.product_bound
                rot_dist = kernels.dist_exp_batch(f1[None, 3:], f2[None, 3:])[0]
                assert rot_dist / dx <= rot_bound  # mu = 1 for exp coords


class TestRotationalBounds:
    def test_mu_one_passthrough(self):
        rb = rotational_bound(5.0, EXP_U)
        assert rb.L_r_bound == 5.0 and rb.mu == 1.0

    def test_quaternion_scaling(self):
        rb = rotational_bound(5.0, QUAT)
        assert abs(rb.L_r_bound - 5.0 * math.pi / math.sqrt(2.0)) <= 1e-12

    def test_zero_is_zero(self):
        assert rotational_bound(0.0, QUAT).L_r_bound == 0.0

    def test_unbounded_parameterization_rejected(self):
        with pytest.raises(UnboundedConstantError):
            rotational_bound(1.0, QUAT_U)

    def test_invariant_product(self, rng):
        for _ in range(20):
            L_e = float(rng.uniform(0.0, 1e12))
            rb = rotational_bound(L_e, QUAT)
            assert rb.L_r_bound == rb.mu * rb.L_e_bound


class TestPerturbationBounds:
    def test_zero_epsilon(self):
        pb = perturbation_bound(0.0, 7.0, EXP_U)
        assert pb.output_radius == 0.0 and pb.useful

    def test_reported_network_scale(self):
        pb = perturbation_bound(1.1e-11, 84e9, EXP_U)
        assert pb.output_radius <= 1.0
        assert abs(pb.output_radius - 0.924) <= 1e-3
        assert pb.useful

    def test_not_useful_beyond_pi(self):
        pb = perturbation_bound(4.0, 1.0, EXP_U)
        assert pb.output_radius == 4.0 and not pb.useful

    def test_inverse_matches_reported_epsilon(self):
        eps, unbounded = inverse_perturbation(1.0, 84e9, EXP_U)
        assert not unbounded
        assert 1.0e-11 <= eps <= 1.3e-11

    def test_inverse_round_trip(self):
        eps, _ = inverse_perturbation(0.5, 123.0, QUAT)
        pb = perturbation_bound(eps, 123.0, QUAT)
        assert abs(pb.output_radius - 0.5) <= 1e-12 * 0.5

    def test_inverse_trivial_case(self):
        eps, _ = inverse_perturbation(math.pi, math.pi, EXP_U)
        assert eps == 1.0

    def test_inverse_unbounded_when_le_zero(self):
        eps, unbounded = inverse_perturbation(1.0, 0.0, EXP_U)
        assert unbounded and math.isinf(eps)

    def test_target_validation(self):
        with pytest.raises(InvalidArgumentError):
            inverse_perturbation(0.0, 1.0, EXP_U)
        with pytest.raises(InvalidArgumentError):
            inverse_perturbation(3.5, 1.0, EXP_U)
