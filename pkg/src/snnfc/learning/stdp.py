"""Single-layer LIF networks trained with pair-based STDP.

Each output neuron integrates ``input_gain * W @ x_t``; lateral inhibition
subtracts ``inhibition`` per spike of any other neuron on the following
step, and every spike raises the neuron's own threshold by ``theta_plus``
(decaying slowly) for homeostasis. Plasticity uses exponential traces:

* post spike of j:   W[j, :] += a_plus * pre_trace
* pre spike of i:    W[:, i] -= a_minus * post_trace

with hard clipping to ``[w_min, w_max]`` after every update.
"""

from __future__ import annotations

import logging

import numpy as np

from ..neuron import LIFState, lif_step
from .model import StdpParams, TrainingError

log = logging.getLogger(__name__)


class DeadNetworkError(TrainingError):
    pass


def init_weights(n_out: int, n_in: int, p: StdpParams, rng: np.random.Generator) -> np.ndarray:
    W = rng.uniform(p.w_min, p.w_min + 0.3 * (p.w_max - p.w_min), size=(n_out, n_in))
    return normalize(W, p)


def normalize(W: np.ndarray, p: StdpParams) -> np.ndarray:
    if p.weight_norm is None:
        return W
    mean = W.mean(axis=1, keepdims=True)
    W = W * (p.weight_norm / np.maximum(mean, 1e-12))
    return np.clip(W, p.w_min, p.w_max)


def run(x: np.ndarray, W: np.ndarray, theta: np.ndarray, p: StdpParams, *,
        learn: bool = False, eligible: np.ndarray | None = None,
        teacher: np.ndarray | None = None, on_update=None):
    """Simulate the layer for a batch of input patterns x (B, n_in, T).

    Returns output spikes (B, n_out, T). With ``learn`` the batch must hold a
    single pattern and W / theta are modified in place. ``eligible`` (B, n_out)
    restricts potentiation to the marked neurons (depression still applies
    to every neuron that fired); ``teacher`` (B, n_out) is an extra constant
    current.
    """
    x = np.asarray(x, dtype=float)
    B, n_in, T = x.shape
    n_out = W.shape[0]
    if learn and B != 1:
        raise ValueError("plastic runs take one pattern at a time")
    state = LIFState(np.zeros((B, n_out)), np.zeros((B, n_out), dtype=np.int64),
                     threshold=p.threshold + theta, leak_factor=p.leak,
                     refractory=p.refractory)
    out = np.zeros((B, n_out, T), dtype=np.uint8)
    drive = p.input_gain * np.einsum("ji,bit->btj", W, x, optimize=True)
    inhib = np.zeros((B, n_out))
    dpre = np.exp(-1.0 / p.tau_plus)
    dpost = np.exp(-1.0 / p.tau_minus)
    dtheta = np.exp(-p.theta_decay)
    pre_tr = np.zeros(n_in)
    post_tr = np.zeros(n_out)
    for t in range(T):
        current = (drive[:, t] if not learn else p.input_gain * (W @ x[0, :, t])[None]) - inhib
        if teacher is not None:
            current = current + teacher
        state, spikes = lif_step(state, current)
        out[:, :, t] = spikes
        n_spk = spikes.sum(axis=1, keepdims=True)
        inhib = p.inhibition * (n_spk - spikes)
        if learn:
            pre = x[0, :, t]
            pre_tr = pre_tr * dpre + pre
            post = spikes[0].astype(float)
            if pre.any():
                # depression uses the post trace from before this step's spikes
                W[:, pre > 0] -= p.a_minus * post_tr[:, None]
                np.clip(W, p.w_min, p.w_max, out=W)
            post_tr = post_tr * dpost + post
            grow = post > 0 if eligible is None else (post > 0) & eligible[0]
            if grow.any():
                W[grow] += p.a_plus * pre_tr[None, :]
                np.clip(W, p.w_min, p.w_max, out=W)
            if on_update is not None:
                on_update(W)
            theta *= dtheta
            theta += p.theta_plus * post
            state = LIFState(state.membrane, state.refractory_remaining,
                             p.threshold + theta, state.leak_factor, state.resting,
                             state.refractory)
    return out


def train_layer(patterns, labels, n_out: int, p: StdpParams, epochs: int,
                rng: np.random.Generator, class_map=None, encode=None, on_update=None):
    """Present patterns one at a time for ``epochs`` passes; returns (W, theta).

    ``patterns`` is either an array (N, n_in, T) or a value matrix turned into
    patterns by ``encode``. With ``class_map`` the neurons of the sample's
    class receive the teacher current and are the only ones allowed to
    potentiate; other neurons that fire are only depressed.
    """
    N = len(labels)
    first = encode(patterns[:1]) if encode is not None else np.asarray(patterns[:1])
    n_in = first.shape[1]
    W = init_weights(n_out, n_in, p, rng)
    theta = np.zeros(n_out)
    class_map = None if class_map is None else np.asarray(class_map)
    for epoch in range(epochs):
        total = 0
        for idx in rng.permutation(N):
            x = encode(patterns[idx:idx + 1]) if encode is not None else patterns[idx:idx + 1]
            eligible = teacher = None
            if class_map is not None:
                mine = class_map == labels[idx]
                eligible = mine[None]
                teacher = (p.teacher_current * mine)[None]
            spikes = run(x, W, theta, p, learn=True, eligible=eligible, teacher=teacher,
                         on_update=on_update)
            total += int(spikes.sum())
            if p.weight_norm is not None:
                W[:] = normalize(W, p)
                if on_update is not None:
                    on_update(W)
        log.info("stdp epoch %d: %d output spikes", epoch, total)
        if total == 0:
            raise DeadNetworkError(
                f"no output spikes during epoch {epoch}; raise input_gain or lower threshold")
    return W, theta


def assign_classes(spikes: np.ndarray, labels: np.ndarray, n_classes: int,
                   rule: str = "total") -> np.ndarray:
    """Label each neuron from a labelled pass.

    ``total``: the class it fired most spikes for; ``mean``: the class with
    its highest mean response per record (ignores class frequencies).
    """
    if rule not in ("total", "mean"):
        raise ValueError(f"unknown assignment rule {rule!r}")
    counts = spikes.sum(axis=2)  # (N, n_out)
    resp = np.zeros((n_classes, counts.shape[1]))
    for c in range(n_classes):
        sel = labels == c
        if sel.any():
            resp[c] = counts[sel].sum(axis=0) if rule == "total" else counts[sel].mean(axis=0)
    return np.argmax(resp, axis=0)
