"""Training entry points for the three SNN families, plus inference and scoring."""

from __future__ import annotations

import logging
import time
from dataclasses import replace

import numpy as np

from ..dataset import FeatureSchema
from ..encoding import (CTECodebook, TargetPatternSet, build_codebook, decode_rate_batch,
                        decode_temporal_batch, encode_batch, generate_targets)
from ..neuron import SRMKernels
from . import stdp
from .model import TrainConfig, TrainedModel, TrainingError
from .prob_bp import SRMNetwork
from .snu import SNUNetwork

log = logging.getLogger(__name__)

EVAL_BATCH = 256


class DivergenceError(TrainingError):
    pass


def _codebook(schema: FeatureSchema, cfg: TrainConfig) -> CTECodebook:
    return build_codebook(schema, cfg.cte)


def _targets(cfg: TrainConfig, n_classes: int) -> TargetPatternSet:
    tp = cfg.targets
    return generate_targets(n_classes, n_classes * tp.neurons_per_class, cfg.cte.n_steps,
                            tp.seed, spikes_per_neuron=tp.spikes_per_neuron, floor=tp.floor,
                            tau=tp.tau)


def _kernels(cfg: TrainConfig) -> SRMKernels:
    s = cfg.srm
    return SRMKernels(s.eps_tau_m, s.eps_tau_s, s.kappa_tau, s.kappa_amplitude, s.beta)


def _model(cfg, schema, codebook, arrays, decoder, manifest):
    return TrainedModel(cfg.kind, cfg, schema.to_dict(), codebook.to_dict(), arrays,
                        decoder, manifest)


def _lr(cfg: TrainConfig, epoch: int) -> float:
    if cfg.kind == "snu-bp" and cfg.snu.cosine_decay:
        return cfg.learning_rate * 0.5 * (1.0 + np.cos(np.pi * epoch / cfg.epochs))
    return cfg.learning_rate


def _clip(grads, max_norm):
    if max_norm is None:
        return grads
    norm = np.sqrt(sum(float((g * g).sum()) for g in grads))
    if norm > max_norm:
        return [g * (max_norm / norm) for g in grads]
    return grads


# ---------------------------------------------------------------- STDP

def stdp_train_unsupervised(values, labels, schema: FeatureSchema, cfg: TrainConfig) -> TrainedModel:
    """Unsupervised STDP, then label each neuron by its mean response per class."""
    t0 = time.perf_counter()
    cb = _codebook(schema, cfg)
    rng = np.random.default_rng(cfg.seed)
    enc = lambda v: encode_batch(v, cb)
    W, theta = stdp.train_layer(values, labels, cfg.stdp.n_neurons, cfg.stdp, cfg.epochs, rng,
                                encode=enc)
    spikes = _stdp_spikes(W, theta, cfg, cb, values)
    class_map = stdp.assign_classes(spikes, np.asarray(labels), schema.n_classes,
                                      cfg.stdp.assign)
    manifest = {"train_seconds": time.perf_counter() - t0}
    return _model(cfg, schema, cb, {"W0": W, "theta": theta},
                  {"class_map": class_map.tolist()}, manifest)


def stdp_train_supervised(values, labels, schema: FeatureSchema, cfg: TrainConfig) -> TrainedModel:
    """STDP where only the true class's neurons may fire, driven by a teacher current."""
    t0 = time.perf_counter()
    cb = _codebook(schema, cfg)
    rng = np.random.default_rng(cfg.seed)
    npc = cfg.targets.neurons_per_class
    class_map = np.repeat(np.arange(schema.n_classes), npc)
    enc = lambda v: encode_batch(v, cb)
    p = replace(cfg.stdp, theta_plus=cfg.stdp.sup_theta_plus, weight_norm=cfg.stdp.sup_weight_norm)
    W, theta = stdp.train_layer(values, labels, len(class_map), p, cfg.epochs, rng,
                                class_map=class_map, encode=enc)
    manifest = {"train_seconds": time.perf_counter() - t0}
    return _model(cfg, schema, cb, {"W0": W, "theta": theta},
                  {"class_map": class_map.tolist()}, manifest)


def _stdp_spikes(W, theta, cfg, cb, values):
    out = []
    for i in range(0, len(values), EVAL_BATCH):
        x = encode_batch(values[i:i + EVAL_BATCH], cb)
        out.append(stdp.run(x, W, theta, cfg.stdp))
    return np.concatenate(out)


# ---------------------------------------------------------------- SRM

def prob_bp_train(values, labels, schema: FeatureSchema, cfg: TrainConfig,
                  history: list | None = None) -> TrainedModel:
    """Stochastic gradient ascent on the target log-likelihood of an SRM network."""
    t0 = time.perf_counter()
    cb = _codebook(schema, cfg)
    targets = _targets(cfg, schema.n_classes)
    rng = np.random.default_rng(cfg.seed)
    net = SRMNetwork.init(cfg.layer_sizes(cb.n_inputs, schema.n_classes), rng, _kernels(cfg))
    labels = np.asarray(labels)
    losses = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(labels))
        total = 0.0
        for i in range(0, len(perm), cfg.batch_size):
            b = perm[i:i + cfg.batch_size]
            x = encode_batch(values[b], cb)
            z = targets.patterns[labels[b]].astype(float)
            nll, grads = net.nll_and_grads(x, z, rng)
            if not np.isfinite(nll):
                raise DivergenceError(f"log-likelihood diverged in epoch {epoch}")
            for W, g in zip(net.weights, grads):
                W -= cfg.learning_rate * g
            total += nll * len(b)
        losses.append(total / len(perm))
        log.info("prob-bp epoch %d: nll %.4f", epoch, losses[-1])
    if history is not None:
        history.extend(losses)
    arrays = {f"W{i}": W for i, W in enumerate(net.weights)}
    manifest = {"loss_curve": losses, "train_seconds": time.perf_counter() - t0}
    return _model(cfg, schema, cb, arrays, {"targets": targets.to_dict()}, manifest)


# ---------------------------------------------------------------- SNU

def snu_bpt_train(values, labels, schema: FeatureSchema, cfg: TrainConfig,
                  history: list | None = None) -> TrainedModel:
    """Backpropagation through time on stacked spiking neural units."""
    t0 = time.perf_counter()
    cb = _codebook(schema, cfg)
    targets = _targets(cfg, schema.n_classes)
    rng = np.random.default_rng(cfg.seed)
    sp = cfg.snu
    net = SNUNetwork.init(cfg.layer_sizes(cb.n_inputs, schema.n_classes), rng, leak=sp.leak,
                          steepness=sp.steepness, bias=sp.bias_init)
    z_all = targets.patterns.transpose(0, 2, 1).astype(float)
    labels = np.asarray(labels)
    losses = []
    for epoch in range(cfg.epochs):
        lr = _lr(cfg, epoch)
        perm = rng.permutation(len(labels))
        total = 0.0
        for i in range(0, len(perm), cfg.batch_size):
            b = perm[i:i + cfg.batch_size]
            x = encode_batch(values[b], cb).transpose(0, 2, 1)
            loss, grads = net.loss_and_grads(x, z_all[labels[b]], pos_weight=sp.pos_weight)
            if not np.isfinite(loss):
                raise DivergenceError(f"loss diverged in epoch {epoch}")
            for p, g in zip(net.params(), _clip(grads, sp.clip_norm)):
                p -= lr * g
            if sp.weight_clip is not None:
                for W in net.weights:
                    bound = sp.weight_clip * W.std()
                    np.clip(W, -bound, bound, out=W)
            total += loss * len(b)
        losses.append(total / len(perm))
        log.info("snu-bp epoch %d: loss %.4f", epoch, losses[-1])
    if history is not None:
        history.extend(losses)
    arrays = {}
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"W{i}"], arrays[f"b{i}"] = W, b
    manifest = {"loss_curve": losses, "train_seconds": time.perf_counter() - t0}
    return _model(cfg, schema, cb, arrays, {"targets": targets.to_dict()}, manifest)


def snu_network(model: TrainedModel) -> SNUNetwork:
    sp = model.config.snu
    return SNUNetwork(model.layer_weights(), model.layer_biases(), sp.leak, sp.steepness)


# ---------------------------------------------------------------- inference

TRAINERS = {
    "stdp-unsup": stdp_train_unsupervised,
    "stdp-sup": stdp_train_supervised,
    "prob-bp": prob_bp_train,
    "snu-bp": snu_bpt_train,
}


def train(values, labels, schema: FeatureSchema, cfg: TrainConfig) -> TrainedModel:
    return TRAINERS[cfg.kind](values, labels, schema, cfg)


def output_spikes(model: TrainedModel, values, linear=None, eval_seed: int = 0) -> np.ndarray:
    """Output spike patterns (N, n_out, T) under the model's inference rule."""
    cb = CTECodebook.from_dict(model.codebook)
    values = np.asarray(values)
    outs = []
    if model.kind == "snu-bp":
        net = snu_network(model)
        for i in range(0, len(values), EVAL_BATCH):
            x = encode_batch(values[i:i + EVAL_BATCH], cb).transpose(0, 2, 1)
            outs.append(net.forward(x, mode="hard", linear=linear).transpose(0, 2, 1))
    elif model.kind == "prob-bp":
        net = SRMNetwork(model.layer_weights(), _kernels(model.config))
        rng = np.random.default_rng(eval_seed) if model.config.srm.sampled_eval else None
        for i in range(0, len(values), EVAL_BATCH):
            outs.append(net.predict_spikes(encode_batch(values[i:i + EVAL_BATCH], cb), rng))
    elif model.kind in ("stdp-unsup", "stdp-sup"):
        return _stdp_spikes(model.arrays["W0"], model.arrays["theta"], model.config, cb, values)
    else:
        raise ValueError(f"{model.kind!r} has no spiking output")
    return np.concatenate(outs)


def decode(model: TrainedModel, spikes: np.ndarray) -> np.ndarray:
    if "targets" in model.decoder:
        return decode_temporal_batch(spikes, TargetPatternSet.from_dict(model.decoder["targets"]))
    return decode_rate_batch(spikes, model.decoder["class_map"])


def predict(model: TrainedModel, values, linear=None) -> np.ndarray:
    return decode(model, output_spikes(model, values, linear))


def confusion(y_true, y_pred, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def evaluate(model: TrainedModel, values, labels, linear=None) -> tuple[float, np.ndarray]:
    """Accuracy and confusion matrix (rows: true class, columns: predicted)."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("empty test set")
    pred = predict(model, values, linear)
    n_classes = len(model.schema["class_names"])
    return float(np.mean(pred == labels)), confusion(labels, pred, n_classes)
