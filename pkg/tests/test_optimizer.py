"""
Tests for SGD with momentum, weight decay, eta clamping and the lr policy.
"""
from collections import OrderedDict

import numpy as np
import pytest

from viraliency.core.exceptions import NonFiniteError, ShapeMismatchError
from viraliency.schemas.train import TrainConfig
from viraliency.services.optimizer import EtaMoments, lr_at, sgd_step
from viraliency.services.pooling import EtaVector, lena_eta_grad


def params(weight=2.0, eta=0.5):
    return OrderedDict([("conv0.weight", np.array([weight])), ("eta", np.array([eta]))])


def grads(weight=0.0, eta=0.0):
    return OrderedDict([("conv0.weight", np.array([weight])), ("eta", np.array([eta]))])


class TestSgdStep:

    def test_weight_decay_only(self):
        cfg = TrainConfig(weight_decay=0.05)
        state = sgd_step(params(), grads(), None, 0.1, cfg)
        assert state.params["conv0.weight"][0] == pytest.approx(2.0 * (1.0 - 0.1 * 0.05), rel=1e-15)

    def test_eta_has_no_weight_decay(self):
        state = sgd_step(params(), grads(), None, 0.1, TrainConfig(weight_decay=0.05))
        assert state.params["eta"][0] == 0.5

    def test_eta_clamped(self):
        cfg = TrainConfig(eta_lr_multiplier=1.0)
        state = sgd_step(params(eta=0.9), grads(eta=-1.0), None, 0.2, cfg)
        assert state.params["eta"][0] == 1.0

    def test_eta_clamped_below(self):
        state = sgd_step(params(eta=0.05), grads(eta=1.0), None, 0.2, TrainConfig())
        assert state.params["eta"][0] == 0.0

    def test_eta_multiplier(self):
        cfg = TrainConfig(momentum=0.0, eta_lr_multiplier=10.0)
        state = sgd_step(params(eta=0.5), grads(eta=-0.01), None, 0.1, cfg)
        assert state.params["eta"][0] == pytest.approx(0.51, rel=1e-14)

    def test_momentum_accumulates(self):
        cfg = TrainConfig(momentum=0.9, weight_decay=0.0)
        first = sgd_step(params(), grads(weight=1.0), None, 0.1, cfg)
        second = sgd_step(first.params, grads(weight=1.0), first.velocity, 0.1, cfg)
        step_one = first.params["conv0.weight"][0] - 2.0
        step_two = second.params["conv0.weight"][0] - first.params["conv0.weight"][0]
        assert step_two == pytest.approx(1.9 * step_one, rel=1e-12)

    def test_plain_gradient_descent(self, rng):
        cfg = TrainConfig(momentum=0.0, weight_decay=0.0)
        theta = rng.standard_normal(5)
        g = rng.standard_normal(5)
        state = sgd_step({"w": theta}, {"w": g}, None, 0.01, cfg)
        np.testing.assert_array_equal(state.params["w"], theta - 0.01 * g)

    def test_frozen_untouched(self):
        state = sgd_step(params(), grads(weight=3.0), None, 0.1, TrainConfig(), frozen={"conv0.weight"})
        assert state.params["conv0.weight"][0] == 2.0

    def test_inputs_not_modified(self):
        before = params()
        sgd_step(before, grads(weight=1.0, eta=1.0), None, 0.1, TrainConfig())
        assert before["conv0.weight"][0] == 2.0
        assert before["eta"][0] == 0.5

    def test_nan_gradient_named(self):
        with pytest.raises(NonFiniteError) as exc:
            sgd_step(params(), grads(weight=np.nan), None, 0.1, TrainConfig())
        assert "conv0.weight" in exc.value.message

    def test_shape_checked(self):
        bad = OrderedDict([("conv0.weight", np.zeros(2)), ("eta", np.zeros(1))])
        with pytest.raises(ShapeMismatchError):
            sgd_step(params(), bad, None, 0.1, TrainConfig())

    @pytest.mark.parametrize("upstream,direction", [(1.0, 1.0), (-1.0, -1.0)])
    def test_eta_moves_against_pooled_gradient_sign(self, upstream, direction):
        feature = np.array([[[4.0, 2.0], [0.0, 0.0]]])
        eta_grad = lena_eta_grad(feature, EtaVector.full(1, 1.0 / 3.0), np.array([upstream]))
        cfg = TrainConfig(momentum=0.0)
        state = sgd_step(OrderedDict([("eta", np.array([0.5]))]), OrderedDict([("eta", eta_grad)]), None, 0.01, cfg)
        assert np.sign(state.params["eta"][0] - 0.5) == direction


class TestAdaptiveEta:

    @pytest.fixture
    def cfg(self):
        return TrainConfig(eta_update="adaptive", weight_decay=0.05)

    @pytest.mark.parametrize("eta_grad", [-1e-5, -1e-2, -10.0])
    def test_step_independent_of_gradient_scale(self, cfg, eta_grad):
        state = sgd_step(params(), grads(eta=eta_grad), None, 0.01, cfg)
        assert state.params["eta"][0] == pytest.approx(0.51, abs=1e-6)
        assert state.eta_moments.steps == 1

    def test_zero_gradient_and_no_weight_decay(self, cfg):
        state = sgd_step(params(), grads(), None, 0.1, cfg)
        assert state.params["eta"][0] == 0.5
        assert state.params["conv0.weight"][0] == pytest.approx(2.0 * (1.0 - 0.1 * 0.05), rel=1e-15)

    def test_clamped(self, cfg):
        upper = sgd_step(params(eta=0.995), grads(eta=-1.0), None, 0.01, cfg)
        lower = sgd_step(params(eta=0.002), grads(eta=3.0), None, 0.01, cfg)
        assert upper.params["eta"][0] == 1.0
        assert lower.params["eta"][0] == 0.0

    def test_consistent_sign_keeps_full_steps(self, cfg):
        first = sgd_step(params(), grads(eta=-0.2), None, 0.01, cfg)
        second = sgd_step(first.params, grads(eta=-0.2), first.velocity, 0.01, cfg, eta_moments=first.eta_moments)
        assert second.eta_moments.steps == 2
        step_one = first.params["eta"][0] - 0.5
        step_two = second.params["eta"][0] - first.params["eta"][0]
        assert step_two == pytest.approx(step_one, rel=1e-9)

    def test_sign_flip_damps_step(self, cfg):
        first = sgd_step(params(), grads(eta=1.0), None, 0.01, cfg)
        second = sgd_step(first.params, grads(eta=-1.0), first.velocity, 0.01, cfg, eta_moments=first.eta_moments)
        step_one = first.params["eta"][0] - 0.5
        step_two = second.params["eta"][0] - first.params["eta"][0]
        assert step_one < 0.0 < step_two
        assert step_two < 0.1 * abs(step_one)

    def test_frozen_keeps_moments(self, cfg):
        moments = EtaMoments(mean=np.array([0.3]), square=np.array([0.2]), steps=4)
        state = sgd_step(params(), grads(eta=-1.0), None, 0.01, cfg, frozen={"eta"}, eta_moments=moments)
        assert state.params["eta"][0] == 0.5
        assert state.eta_moments is moments

    def test_sgd_update_keeps_no_moments(self):
        state = sgd_step(params(), grads(eta=-1.0), None, 0.01, TrainConfig())
        assert state.eta_moments is None

    def test_unknown_update_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(eta_update="rmsprop")



class TestLrAt:

    def test_base(self):
        assert lr_at(0, TrainConfig()) == 1e-4

    def test_floor_before_step(self):
        assert lr_at(4999, TrainConfig()) == 1e-4

    def test_first_step(self):
        assert lr_at(5000, TrainConfig()) == pytest.approx(1e-5, rel=1e-12)

    def test_non_increasing(self):
        cfg = TrainConfig(lr_step_every=3, lr_step_factor=0.5)
        rates = [lr_at(i, cfg) for i in range(20)]
        assert all(later <= earlier for earlier, later in zip(rates, rates[1:]))

    def test_negative_iteration(self):
        with pytest.raises(ValueError):
            lr_at(-1, TrainConfig())
