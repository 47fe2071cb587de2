import numpy as np
import pytest

from snnfc.dataset import FeatureSchema
from snnfc.encoding import encode_batch, generate_targets
from snnfc.learning import stdp
from snnfc.learning.model import (StdpParams, TrainConfig, TrainedModel, load_model, save_model)
from snnfc.learning.prob_bp import SRMNetwork
from snnfc.learning.snu import SNUNetwork
from snnfc.learning.train import _codebook, evaluate, predict, snu_bpt_train, train


def rel_err(a, b, floor=1e-7):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def central_diff(f, params, h):
    out = []
    for P in params:
        g = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            old = P[idx]
            P[idx] = old + h
            lp = f()
            P[idx] = old - h
            lm = f()
            P[idx] = old
            g[idx] = (lp - lm) / (2 * h)
        out.append(g)
    return out


def small_schema(n_classes=4):
    return FeatureSchema(("a", "b", "c"), ("categorical",) * 3,
                         (("x", "y"), ("p", "q", "r"), ("s", "t")),
                         tuple(f"c{i}" for i in range(n_classes)))


def balanced_values(n_per_class=8, n_classes=4, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    values = np.stack([rng.integers(0, c, len(labels)) for c in (3, 4, 3)], axis=1)
    return values, labels


# ---------------------------------------------------------------- SNU

def test_snu_soft_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    net = SNUNetwork.init([5, 4, 4], rng, leak=0.8, steepness=2.0, bias=-0.2)
    x = (rng.random((2, 10, 5)) < 0.4).astype(float)
    z = (rng.random((2, 10, 4)) < 0.2).astype(float)
    _, grads = net.loss_and_grads(x, z, mode="soft", pos_weight=3.0)
    fd = central_diff(lambda: net.loss_and_grads(x, z, mode="soft", pos_weight=3.0)[0],
                      net.params(), 1e-6)
    assert max(rel_err(g, f) for g, f in zip(grads, fd)) < 1e-4


def test_snu_rejects_hard_mode_gradients():
    net = SNUNetwork.init([3, 2], np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.loss_and_grads(np.zeros((1, 4, 3)), np.zeros((1, 4, 2)), mode="hard")


def test_snu_loss_trend_on_small_subset(car_subset):
    values, labels, schema = car_subset
    hist = []
    cfg = TrainConfig(kind="snu-bp", hidden=[256], learning_rate=0.01, epochs=15)
    snu_bpt_train(values, labels, schema, cfg, history=hist)
    h = np.array(hist)
    assert np.all(h[1:] <= h[:-1] * 1.05)
    assert h[-1] < h[0]


# ---------------------------------------------------------------- SRM probabilistic backprop

def test_prob_bp_output_gradient_with_frozen_hidden():
    rng = np.random.default_rng(1)
    net = SRMNetwork.init([6, 5, 3], rng)
    x = (rng.random((2, 6, 30)) < 0.15).astype(float)
    frozen = [(rng.random((2, 5, 30)) < 0.2).astype(float)]
    z = (rng.random((2, 3, 30)) < 0.1).astype(float)
    _, grads = net.nll_and_grads(x, z, frozen_hidden=frozen)
    fd = central_diff(lambda: net.nll_and_grads(x, z, frozen_hidden=frozen)[0],
                      [net.weights[-1]], 1e-6)[0]
    assert rel_err(grads[-1], fd) < 1e-4


def test_prob_bp_single_layer_gradient_is_exact():
    rng = np.random.default_rng(2)
    net = SRMNetwork.init([8, 3], rng)
    x = (rng.random((3, 8, 25)) < 0.2).astype(float)
    z = (rng.random((3, 3, 25)) < 0.1).astype(float)
    _, grads = net.nll_and_grads(x, z)
    fd = central_diff(lambda: net.nll_and_grads(x, z)[0], net.weights, 1e-6)
    assert rel_err(grads[0], fd[0]) < 1e-4


# ---------------------------------------------------------------- STDP

def test_stdp_weights_stay_clipped_after_every_update():
    rng = np.random.default_rng(3)
    p = StdpParams(n_neurons=6, a_plus=0.2, a_minus=0.2, input_gain=1.0)
    pats = (rng.random((10, 30, 40)) < 0.1).astype(float)
    seen = []

    def check(W):
        seen.append(True)
        assert W.min() >= p.w_min and W.max() <= p.w_max

    stdp.train_layer(pats, np.zeros(10, int), 6, p, 2, rng, on_update=check)
    assert len(seen) > 100


def test_stdp_repeated_pattern_strengthens_the_winner():
    for seed in range(3):
        rng = np.random.default_rng(seed)
        p = StdpParams()
        x = (rng.random((1, 60, 80)) < 0.05).astype(float)
        W = stdp.init_weights(5, 60, p, rng)
        theta = np.zeros(5)
        active = x[0].any(axis=1)
        winner = None
        totals = []
        for _ in range(20):
            out = stdp.run(x, W, theta, p, learn=True)
            if winner is None and out.any():
                winner = int(out[0].sum(axis=1).argmax())
            if winner is not None:
                totals.append(W[winner, active].sum())
        assert np.all(np.diff(totals) >= -1e-12)
        if totals:
            assert totals[-1] > totals[0]


def test_supervised_stdp_degenerate_teacher():
    schema = small_schema()
    values = np.tile([[1, 2, 0]], (30, 1))
    for c in range(4):
        m = train(values, np.full(30, c), schema, TrainConfig(kind="stdp-sup", epochs=1))
        assert np.all(predict(m, values[:3]) == c)


def test_dead_network_aborts():
    schema = small_schema()
    values, labels = balanced_values()
    cfg = TrainConfig(kind="stdp-unsup", epochs=1)
    cfg.stdp.input_gain = 0.0
    with pytest.raises(stdp.DeadNetworkError):
        train(values, labels, schema, cfg)


def test_assign_classes_rules():
    spikes = np.zeros((4, 2, 5))
    spikes[0, 0, :3] = 1  # class 0 record
    spikes[1, 0, :3] = 1  # class 0 record
    spikes[2, 0, :4] = 1  # class 1 record
    spikes[3, 1, :1] = 1  # class 1 record
    labels = np.array([0, 0, 1, 1])
    assert stdp.assign_classes(spikes, labels, 2, "total").tolist() == [0, 1]
    assert stdp.assign_classes(spikes, labels, 2, "mean").tolist() == [0, 1]
    spikes[2, 0, :] = 0
    spikes[2, 0, :5] = 1
    labels = np.array([0, 0, 1, 0])
    # three class-0 records fire 6 in total, one class-1 record fires 5
    assert stdp.assign_classes(spikes, labels, 2, "total")[0] == 0
    assert stdp.assign_classes(spikes, labels, 2, "mean")[0] == 1


# ---------------------------------------------------------------- models and evaluation

@pytest.mark.parametrize("kind", ["stdp-unsup", "stdp-sup", "prob-bp", "snu-bp"])
def test_training_is_deterministic_and_round_trips(kind, tmp_path):
    schema = small_schema()
    values, labels = balanced_values()
    cfg = TrainConfig(kind=kind, hidden=[6] if kind.endswith("bp") else [], epochs=2)
    a = train(values, labels, schema, cfg)
    b = train(values, labels, schema, cfg)
    assert a.arrays.keys() == b.arrays.keys()
    for k in a.arrays:
        assert np.array_equal(a.arrays[k], b.arrays[k])
    save_model(a, tmp_path / "m.npz")
    back = load_model(tmp_path / "m.npz")
    for k in a.arrays:
        assert back.arrays[k].dtype == a.arrays[k].dtype
        assert np.array_equal(back.arrays[k], a.arrays[k])
    assert back.config == a.config and back.decoder == a.decoder
    assert np.array_equal(predict(back, values), predict(a, values))
    assert evaluate(back, values, labels)[0] == evaluate(a, values, labels)[0]


def test_silent_model_scores_chance_on_balanced_set():
    schema = small_schema()
    values, labels = balanced_values()
    cfg = TrainConfig(kind="snu-bp", epochs=0)
    m = train(values, labels, schema, cfg)
    arrays = {k: np.zeros_like(v) for k, v in m.arrays.items()}
    arrays["b0"] = np.full_like(m.arrays["b0"], -1.0)
    silent = TrainedModel(m.kind, m.config, m.schema, m.codebook, arrays, m.decoder)
    acc, cm = evaluate(silent, values, labels)
    assert acc == 0.25
    assert np.count_nonzero(cm.sum(axis=0)) == 1


def test_memorises_ten_records(car_subset):
    values, labels, schema = car_subset
    cfg = TrainConfig(kind="snu-bp", hidden=[32], epochs=150, learning_rate=0.01, batch_size=10)
    m = train(values[:10], labels[:10], schema, cfg)
    assert evaluate(m, values[:10], labels[:10])[0] == 1.0


def test_empty_test_set():
    schema = small_schema()
    values, labels = balanced_values()
    m = train(values, labels, schema, TrainConfig(kind="snu-bp", epochs=0))
    with pytest.raises(ValueError):
        evaluate(m, values[:0], labels[:0])


def test_output_layer_matches_class_layout():
    schema = small_schema()
    cfg = TrainConfig(kind="snu-bp", hidden=[7], epochs=0)
    cfg.targets.neurons_per_class = 2
    values, labels = balanced_values()
    m = train(values, labels, schema, cfg)
    cb = _codebook(schema, cfg)
    assert m.layer_weights()[0].shape == (7, cb.n_inputs)
    assert m.layer_weights()[-1].shape == (8, 7)
    assert generate_targets(4, 8, cfg.cte.n_steps, seed=0).patterns.shape[1] == 8
    assert encode_batch(values[:1], cb).shape == (1, cb.n_inputs, cfg.cte.n_steps)


def test_weight_clip_compacts_layers():
    schema = small_schema()
    values, labels = balanced_values()
    ratios = {}
    for k in (None, 1.0):
        cfg = TrainConfig(kind="snu-bp", hidden=[8], epochs=3, learning_rate=0.05)
        cfg.snu.weight_clip = k
        m = train(values, labels, schema, cfg)
        ratios[k] = max(np.abs(W).max() / W.std() for W in m.layer_weights())
    assert ratios[1.0] < ratios[None]
