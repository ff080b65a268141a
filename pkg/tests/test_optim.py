"""Glorot initialization, Adam updates, and the warmup schedule."""

import numpy as np
import pytest

from synformer.autodiff import Tensor
from synformer.optim import (
    Adam,
    AdamState,
    adam_step,
    glorot_init,
    inverse_sqrt_lr,
    seeded_rng,
)


class TestGlorot:
    def test_bounds(self):
        w = glorot_init((30, 50), np.random.default_rng(0))
        limit = np.sqrt(6.0 / 80)
        assert np.all(np.abs(w) <= limit)
        assert w.shape == (30, 50)

    def test_deterministic_under_seed(self):
        a = glorot_init((10, 10), np.random.default_rng(5))
        b = glorot_init((10, 10), np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_spread_fills_range(self):
        w = glorot_init((100, 100), np.random.default_rng(1))
        limit = np.sqrt(6.0 / 200)
        assert w.min() < -0.9 * limit and w.max() > 0.9 * limit


class TestSeededRng:
    def test_same_stream_same_draws(self):
        a = seeded_rng(3, "enc0.ffn.w1").uniform(size=5)
        b = seeded_rng(3, "enc0.ffn.w1").uniform(size=5)
        np.testing.assert_array_equal(a, b)

    def test_different_streams_differ(self):
        a = seeded_rng(3, "enc0.ffn.w1").uniform(size=5)
        b = seeded_rng(3, "enc0.ffn.w2").uniform(size=5)
        assert not np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = seeded_rng(3, "w").uniform(size=5)
        b = seeded_rng(4, "w").uniform(size=5)
        assert not np.array_equal(a, b)


class TestAdam:
    def test_hand_computed_first_step(self):
        # p=0, grad=1: m-hat and v-hat are both exactly 1 after bias
        # correction, so the step moves p by -lr
        p = Tensor(np.zeros(1), requires_grad=True, name="p")
        state = AdamState(beta1=0.9, beta2=0.998, eps=1e-9, learning_rate=0.1)
        adam_step({"p": p}, {"p": np.ones(1)}, state)
        np.testing.assert_allclose(p.data, [-0.1], atol=1e-9)
        assert state.step == 1

    def test_zero_grad_no_motion(self):
        p = Tensor(np.full(3, 7.0), requires_grad=True, name="p")
        state = AdamState()
        adam_step({"p": p}, {"p": np.zeros(3)}, state)
        np.testing.assert_allclose(p.data, 7.0, atol=1e-12)

    def test_accumulated_half_batches_match_full_batch(self):
        # backward-accumulated grads from two half batches equal the summed
        # full-batch gradient before the optimizer step
        g1, g2 = np.array([0.3, -1.2]), np.array([0.7, 0.2])
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = g1.copy()
        p.grad += g2
        np.testing.assert_array_equal(p.grad, g1 + g2)

    def test_shape_mismatch_rejected(self):
        p = Tensor(np.zeros(2), requires_grad=True, name="p")
        with pytest.raises(ValueError, match="shape"):
            adam_step({"p": p}, {"p": np.zeros(3)}, AdamState())

    def test_wrapper_scale_divides_grads(self):
        # scale=1/4 on summed grads equals stepping with the mean grad
        pa = Tensor(np.zeros(2), requires_grad=True)
        pa.grad = np.array([4.0, 8.0])
        opt_a = Adam({"p": pa}, learning_rate=0.05)
        opt_a.step(scale=0.25)

        pb = Tensor(np.zeros(2), requires_grad=True)
        pb.grad = np.array([1.0, 2.0])
        opt_b = Adam({"p": pb}, learning_rate=0.05)
        opt_b.step()
        np.testing.assert_allclose(pa.data, pb.data, atol=1e-15)

    def test_zero_grad_clears(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.ones(2)
        opt = Adam({"p": p})
        opt.zero_grad()
        assert p.grad is None


class TestSchedule:
    def test_warmup_ramps_linearly(self):
        lrs = [inverse_sqrt_lr(s, model_dim=64, warmup=100) for s in (1, 50, 100)]
        np.testing.assert_allclose(lrs[1] / lrs[0], 50.0, rtol=1e-12)
        assert lrs[2] == pytest.approx(64 ** -0.5 * 100 ** -0.5)

    def test_decay_after_warmup(self):
        peak = inverse_sqrt_lr(400, model_dim=48, warmup=400)
        later = inverse_sqrt_lr(1600, model_dim=48, warmup=400)
        assert later == pytest.approx(peak / 2)

    def test_monotone_increase_then_decrease(self):
        lrs = [inverse_sqrt_lr(s, 48, warmup=10) for s in range(1, 40)]
        assert np.argmax(lrs) == 9  # peak exactly at the warmup boundary
