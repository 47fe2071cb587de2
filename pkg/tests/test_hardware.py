from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from snnfc import hardware as hw
from snnfc.dataset import FeatureSchema
from snnfc.learning.model import TrainConfig
from snnfc.learning.train import predict, train


@pytest.fixture(scope="module")
def tiny_model():
    schema = FeatureSchema(("a", "b", "c"), ("categorical",) * 3,
                           (("x", "y"), ("p", "q", "r"), ("s", "t")), ("n", "m", "o"))
    rng = np.random.default_rng(0)
    values = np.stack([rng.integers(0, c, 30) for c in (3, 4, 3)], axis=1)
    labels = np.arange(30) % 3
    cfg = TrainConfig(kind="snu-bp", hidden=[12], epochs=3, learning_rate=0.01)
    return train(values, labels, schema, cfg), values, labels


def test_map_weights_example():
    gp, gm, scale = hw.map_weights(np.array([[2.0, -1.0]]))
    assert gp.tolist() == [[25.0, 0.0]] and gm.tolist() == [[0.0, 12.5]] and scale == 12.5


def test_map_weights_rejects_unmappable():
    with pytest.raises(ValueError):
        hw.map_weights(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        hw.map_weights(np.array([[5e-324]]))


def test_map_weights_all_zero():
    gp, gm, scale = hw.map_weights(np.zeros((2, 3)))
    assert scale == 1.0 and not gp.any() and not gm.any()


weights = arrays(float, (4, 5), elements=st.floats(-10, 10, allow_subnormal=False))


@settings(max_examples=100, deadline=None)
@given(weights)
def test_mapping_invariants(W):
    gp, gm, scale = hw.map_weights(W)
    assert gp.min() >= 0 and gm.min() >= 0
    assert max(gp.max(), gm.max()) <= hw.G_MAX
    assert not np.any((gp > 0) & (gm > 0))
    if np.abs(W).max() > 0:
        assert max(gp.max(), gm.max()) == pytest.approx(hw.G_MAX, rel=1e-15)
        np.testing.assert_allclose((gp - gm) / scale, W, rtol=1e-12, atol=1e-12 * np.abs(W).max())


def test_noise_scale_zero_is_identity():
    G = np.random.default_rng(0).uniform(0, 25, (5, 5))
    assert np.array_equal(hw.apply_noise(G, hw.NoiseModel(noise_scale=0.0)), G)


@pytest.mark.parametrize("g", [5.0, 12.5, 20.0])
def test_noise_std_matches_polynomial(g):
    noise = hw.NoiseModel(noise_scale=1.0, seed=1)
    out = hw.apply_noise(np.full(100_000, g), noise)
    assert np.std(out - g) == pytest.approx(float(noise.sigma(g)), rel=0.02)


def test_noise_clipped_to_range():
    noise = hw.NoiseModel(noise_scale=10.0, seed=2)
    out = hw.apply_noise(np.r_[np.zeros(1000), np.full(1000, 25.0)], noise)
    assert out.min() >= 0 and out.max() <= 25.0


def test_noise_is_seeded():
    G = np.random.default_rng(0).uniform(0, 25, (6, 6))
    a = hw.apply_noise(G, hw.NoiseModel(seed=4))
    assert np.array_equal(a, hw.apply_noise(G, hw.NoiseModel(seed=4)))
    assert not np.array_equal(a, hw.apply_noise(G, hw.NoiseModel(seed=5)))


def test_negative_polynomial_rejected():
    with pytest.raises(ValueError):
        hw.NoiseModel(c0=0.0, c1=0.0, c2=-0.01)


def test_zero_input_gives_zero_output():
    rng = np.random.default_rng(3)
    gp, gm, scale = hw.map_weights(rng.normal(size=(4, 6)))
    noise = hw.NoiseModel(noise_scale=10.0)
    gp, gm = hw.apply_noise(gp, noise), hw.apply_noise(gm, noise, np.random.default_rng(1))
    codes, out = hw.crossbar_forward(np.zeros((3, 6)), gp, gm, scale, 1.0)
    assert not codes.any() and not out.any()


@settings(max_examples=100, deadline=None)
@given(weights, st.integers(0, 10_000))
def test_quantised_read_within_half_step(W, seed):
    x = (np.random.default_rng(seed).random((8, 5)) < 0.5).astype(float)
    gp, gm, scale = hw.map_weights(W)
    exact = x @ W.T
    os_ = max(np.abs(exact).max(), 1e-6)
    codes, out = hw.crossbar_forward(x, gp, gm, scale, os_)
    assert np.abs(codes).max() <= 127
    assert np.all(np.abs(out - exact) <= os_ / 254 * (1 + 1e-9) + 1e-12)


def test_quantiser_saturates():
    q = hw.quantize(np.array([-5.0, -1.0, 0.0, 0.5, 1.0, 5.0]), 1.0)
    assert q.tolist() == [-127, -127, 0, 64, 127, 127]


def test_uncalibrated_8bit_read_raises(tiny_model):
    model, values, labels = tiny_model
    with pytest.raises(hw.UncalibratedError):
        hw.hw_evaluate(model, values, labels, hw.NoiseModel(noise_scale=0), hw.CrossbarConfig())


def test_ideal_path_matches_software(tiny_model):
    model, values, _ = tiny_model
    cfg = hw.CrossbarConfig(adc_levels=None)
    assert np.array_equal(hw.hw_predict(model, values, hw.NoiseModel(noise_scale=0), cfg),
                          predict(model, values))


def test_hw_evaluation_deterministic(tiny_model):
    model, values, labels = tiny_model
    cfg = hw.CrossbarConfig(output_scales=hw.calibrate(model, values))
    noise = hw.NoiseModel(noise_scale=5.0, seed=3)
    a = hw.hw_predict(model, values, noise, cfg)
    assert np.array_equal(a, hw.hw_predict(model, values, noise, cfg))


def test_per_sample_mode_runs(tiny_model):
    model, values, labels = tiny_model
    cfg = hw.CrossbarConfig(output_scales=hw.calibrate(model, values))
    noise = hw.NoiseModel(noise_scale=1.0, seed=3, per_sample=True)
    acc = hw.hw_evaluate(model, values[:5], labels[:5], noise, cfg)
    assert 0.0 <= acc <= 1.0


def test_only_snu_models(tiny_model):
    model, values, _ = tiny_model
    with pytest.raises(ValueError):
        hw.hw_predict(replace(model, kind="prob-bp"), values, hw.NoiseModel(), hw.CrossbarConfig())
