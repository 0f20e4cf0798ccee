"""
Tests for the siamese scoring branch, pair logits, the loss and objectness fusion.
"""
import math
from collections import OrderedDict

import numpy as np
import pytest

from viraliency.core.exceptions import NonFiniteError, ShapeMismatchError, StaleCacheError
from viraliency.schemas.data import PairLabel
from viraliency.schemas.model import ConvLayerSpec, ModelConfig, ObjectnessSpec, PoolingMode
from viraliency.services.siamese import (
    ETA_KEY,
    ViralityNet,
    expected_param_shapes,
    fuse_objectness,
    pair_loss,
    pair_losses,
    pairwise_accuracy,
)
from viraliency.services.tensor import ConvParams, relu_forward

HAND_IMAGE_A = np.array([[[1.0, -2.0], [0.5, 3.0]]])
HAND_IMAGE_B = np.array([[[0.0, 1.0], [1.0, 0.0]]])


@pytest.fixture
def hand_model():
    """1x1 conv (weight 2), GMP, head weight 3 and bias 0.5 on 1x2x2 inputs."""
    config = ModelConfig(
        input_channels=1,
        input_height=2,
        input_width=2,
        conv_layers=[ConvLayerSpec(out_channels=1, kernel=1)],
        pooling_mode=PoolingMode.GMP,
        eta_init=0.5,
    )
    params = OrderedDict([
        ("conv0.weight", np.array([[[[2.0]]]])),
        ("conv0.bias", np.array([0.0])),
        ("head.weight", np.array([[3.0]])),
        ("head.bias", np.array([0.5])),
        (ETA_KEY, np.array([0.5])),
    ])
    return ViralityNet(config, params)


@pytest.fixture
def tiny_net(tiny_model_config):
    return ViralityNet.initialize(tiny_model_config, seed=11)


class TestScore:

    def test_zero_image_scores_zero(self, tiny_net):
        score, _ = tiny_net.score(np.zeros((3, 10, 10)))
        assert score == 0.0

    def test_hand_model(self, hand_model):
        # relu(2x) = [2, 0, 1, 6]; max 6; 3 * 6 + 0.5
        assert hand_model.score(HAND_IMAGE_A)[0] == 18.5
        assert hand_model.score(HAND_IMAGE_B)[0] == 6.5

    def test_batch_matches_single(self, tiny_net, rng):
        images = rng.uniform(0.0, 1.0, size=(3, 3, 10, 10))
        scores, _ = tiny_net.forward(images)
        for b in range(3):
            assert scores[b] == pytest.approx(tiny_net.score(images[b])[0], rel=1e-12, abs=1e-12)

    def test_wrong_image_shape(self, tiny_net):
        with pytest.raises(ShapeMismatchError):
            tiny_net.forward(np.zeros((1, 3, 8, 8)))

    def test_non_finite_input(self, tiny_net):
        image = np.zeros((3, 10, 10))
        image[0, 0, 0] = np.inf
        with pytest.raises(NonFiniteError):
            tiny_net.score(image)

    def test_parameter_shapes(self, tiny_model_config, tiny_net):
        shapes = expected_param_shapes(tiny_model_config)
        assert list(shapes) == ["conv0.weight", "conv0.bias", "conv1.weight", "conv1.bias",
                                "head.weight", "head.bias", "eta"]
        assert shapes["conv1.weight"] == (6, 4, 3, 3)
        assert tiny_net.num_parameters == sum(int(np.prod(s)) for s in shapes.values())

    def test_initialisation_seeded(self, tiny_model_config):
        first = ViralityNet.initialize(tiny_model_config, seed=4).params
        second = ViralityNet.initialize(tiny_model_config, seed=4).params
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])
        assert not first["conv0.bias"].any()
        np.testing.assert_array_equal(first[ETA_KEY], np.full(6, 0.3))

    def test_params_read_only(self, tiny_net):
        with pytest.raises(ValueError):
            tiny_net.params["conv0.bias"][0] = 1.0

    @pytest.mark.parametrize("mode,eta", [(PoolingMode.GAP, 1.0), (PoolingMode.GMP, 0.0)])
    def test_fixed_modes_equal_lena_limits(self, tiny_model_config, rng, mode, eta):
        lena = ViralityNet.initialize(tiny_model_config.model_copy(update={"eta_init": eta}), seed=2)
        fixed = ViralityNet(tiny_model_config.model_copy(update={"pooling_mode": mode}), lena.params)
        images = rng.uniform(0.0, 1.0, size=(2, 3, 10, 10))
        np.testing.assert_array_equal(fixed.forward(images)[0], lena.forward(images)[0])


class TestPairLogit:

    def test_identical_images(self, tiny_net, rng):
        image = rng.uniform(0.0, 1.0, size=(3, 10, 10))
        assert tiny_net.pair_logit(image, image.copy()) == 0.0

    def test_antisymmetric(self, tiny_net, rng):
        a = rng.uniform(0.0, 1.0, size=(3, 10, 10))
        b = rng.uniform(0.0, 1.0, size=(3, 10, 10))
        assert tiny_net.pair_logit(b, a) == -tiny_net.pair_logit(a, b)

    def test_hand_model_difference(self, hand_model):
        assert hand_model.pair_logit(HAND_IMAGE_A, HAND_IMAGE_B) == 12.0

    def test_vectorised_matches_single(self, tiny_net, rng):
        a = rng.uniform(0.0, 1.0, size=(2, 3, 10, 10))
        b = rng.uniform(0.0, 1.0, size=(2, 3, 10, 10))
        logits = tiny_net.pair_logits(a, b)
        assert logits[1] == pytest.approx(tiny_net.pair_logit(a[1], b[1]), rel=1e-12, abs=1e-12)


class TestPairLoss:

    def test_symmetric_point(self):
        loss, grad = pair_loss(0.0, PairLabel.A_MORE_VIRAL)
        assert loss == pytest.approx(math.log(2.0), rel=1e-15)
        assert grad == pytest.approx(-0.5, rel=1e-15)
        assert pair_loss(0.0, PairLabel.B_MORE_VIRAL)[1] == pytest.approx(0.5, rel=1e-15)

    def test_logit_two(self):
        loss, _ = pair_loss(2.0, PairLabel.A_MORE_VIRAL)
        assert loss == pytest.approx(math.log1p(math.exp(-2.0)), rel=1e-14)
        assert loss == pytest.approx(0.1269, abs=1e-4)

    @pytest.mark.parametrize("logit", [-50.0, -2.5, 0.0, 0.3, 7.0, 800.0])
    def test_label_flip(self, logit):
        assert pair_loss(logit, PairLabel.A_MORE_VIRAL)[0] == pair_loss(-logit, PairLabel.B_MORE_VIRAL)[0]

    def test_stable_for_large_logits(self):
        losses, grads = pair_losses(np.array([1000.0, -1000.0]), np.array([0.0, 0.0]))
        assert losses[0] == 1000.0
        assert losses[1] == 0.0
        np.testing.assert_array_equal(grads, [1.0, 0.0])

    def test_non_finite_logit(self):
        with pytest.raises(NonFiniteError):
            pair_losses(np.array([np.nan]), np.array([1.0]))


class TestBackward:

    def test_identical_images_cancel(self, tiny_net, rng):
        image = rng.uniform(0.0, 1.0, size=(1, 3, 10, 10))
        _, grads, logits = tiny_net.pair_forward_backward(image, image.copy(), np.array([1.0]))
        assert logits[0] == 0.0
        for name, value in grads.items():
            assert not value.any(), name

    def test_zero_upstream(self, tiny_net, rng):
        _, cache = tiny_net.forward(rng.uniform(0.0, 1.0, size=(2, 3, 10, 10)))
        for value in tiny_net.backward(cache, np.zeros(2)).values():
            assert not value.any()

    def test_stale_cache(self, tiny_net, rng):
        _, cache = tiny_net.forward(rng.uniform(0.0, 1.0, size=(1, 3, 10, 10)))
        tiny_net.set_params(tiny_net.params)
        with pytest.raises(StaleCacheError):
            tiny_net.backward(cache, np.ones(1))

    def test_front_end_skipped(self, tiny_net, rng):
        _, cache = tiny_net.forward(rng.uniform(0.0, 1.0, size=(1, 3, 10, 10)))
        grads = tiny_net.backward(cache, np.ones(1), front_end=False)
        assert not grads["conv0.weight"].any()
        assert grads["head.weight"].any()

    def test_head_bias_gradient(self, tiny_net, rng):
        _, cache = tiny_net.forward(rng.uniform(0.0, 1.0, size=(3, 3, 10, 10)))
        grads = tiny_net.backward(cache, np.array([1.0, 2.0, -0.5]))
        assert grads["head.bias"][0] == 2.5

    def test_eta_not_trained_under_gnap(self, tiny_model_config, rng):
        net = ViralityNet.initialize(tiny_model_config.model_copy(update={"pooling_mode": PoolingMode.GNAP}), seed=1)
        _, cache = net.forward(rng.uniform(0.0, 1.0, size=(1, 3, 10, 10)))
        assert not net.backward(cache, np.ones(1))[ETA_KEY].any()


class TestObjectness:

    def test_block_identity_fusion(self, rng):
        features = rng.standard_normal((2, 4, 4))
        weights = np.zeros((2, 3, 1, 1))
        weights[0, 0, 0, 0] = 1.0
        weights[1, 1, 0, 0] = 1.0
        fusion = ConvParams(weights, np.zeros(2))
        out = fuse_objectness(features, np.zeros((1, 4, 4)), fusion)
        np.testing.assert_array_equal(out, relu_forward(features))

    def test_zero_inputs(self, rng):
        fusion = ConvParams(rng.standard_normal((2, 3, 1, 1)), np.zeros(2))
        assert not fuse_objectness(np.zeros((2, 3, 3)), np.zeros((1, 5, 5)), fusion).any()

    def test_side_maps_resized(self):
        weights = np.zeros((1, 2, 1, 1))
        weights[0, 1, 0, 0] = 1.0
        fusion = ConvParams(weights, np.zeros(1))
        out = fuse_objectness(np.zeros((1, 1, 3)), np.array([[[0.0, 1.0]]]), fusion)
        np.testing.assert_array_equal(out, [[[0.0, 0.5, 1.0]]])

    def test_side_map_count_checked(self, rng):
        fusion = ConvParams(rng.standard_normal((2, 3, 1, 1)), np.zeros(2))
        with pytest.raises(ShapeMismatchError):
            fuse_objectness(np.zeros((2, 3, 3)), np.zeros((2, 3, 3)), fusion)

    def test_network_requires_side_maps(self, tiny_model_config):
        config = tiny_model_config.model_copy(update={"objectness": ObjectnessSpec(num_side_maps=2)})
        net = ViralityNet.initialize(config, seed=0)
        assert net.params["fusion.weight"].shape == (6, 8, 1, 1)
        with pytest.raises(ShapeMismatchError):
            net.forward(np.zeros((1, 3, 10, 10)))
        scores, _ = net.forward(np.zeros((1, 3, 10, 10)), np.zeros((1, 2, 5, 5)))
        assert scores.shape == (1,)


def test_pairwise_accuracy():
    assert pairwise_accuracy([1.0, -1.0, 0.0], [1.0, 0.0, 1.0]) == pytest.approx(2.0 / 3.0)
    assert pairwise_accuracy([], []) == 0.0
