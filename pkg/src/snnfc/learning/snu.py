"""Multi-layer spiking-neural-unit networks trained by backpropagation through time.

Three forward modes share one backward pass:

* ``hard``: step output, used at inference.
* ``soft``: sigmoid output of configurable steepness; the unrolled network is
  then differentiable end to end and its gradient is exact.
* ``surrogate``: step output in the forward pass, sigmoid derivative in the
  backward pass. This is the training default.

The loss is the per-step binary cross-entropy between the sigmoid of each
output unit's logit ``steepness * (s + b)`` and the class's target pattern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..neuron import SNUParams


@dataclass
class SNUNetwork:
    weights: list[np.ndarray]  # (post, pre) per layer
    biases: list[np.ndarray]
    leak: float = 0.8
    steepness: float = 5.0

    @classmethod
    def init(cls, sizes, rng: np.random.Generator, leak=0.8, steepness=5.0, bias=-1.0):
        weights, biases = [], []
        for pre, post in zip(sizes[:-1], sizes[1:]):
            lim = 1.0 / np.sqrt(pre)
            weights.append(rng.uniform(-lim, lim, size=(post, pre)))
            biases.append(np.full(post, float(bias)))
        return cls(weights, biases, leak, steepness)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def layer(self, i: int, soft: bool = False) -> SNUParams:
        return SNUParams(self.weights[i], self.biases[i], self.leak,
                         self.steepness if soft else None)

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    # ------------------------------------------------------------ forward

    def forward(self, x: np.ndarray, mode: str = "hard", linear=None, keep: bool = False):
        """Run all layers over x of shape (B, T, n_in).

        ``linear(i, inp)`` may replace the synaptic product of layer i (used
        by the crossbar simulator). With ``keep`` the per-layer
        (inputs, pre-activations, states, outputs) are returned for backprop.
        """
        h = np.asarray(x, dtype=float)
        cache = []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            drive = h @ W.T if linear is None else linear(i, h)
            B, T, H = drive.shape
            a = np.empty((B, T, H))
            s = np.empty((B, T, H))
            y = np.empty((B, T, H))
            s_prev = np.zeros((B, H))
            y_prev = np.zeros((B, H))
            for t in range(T):
                a_t = drive[:, t] + self.leak * s_prev * (1.0 - y_prev)
                s_prev = np.maximum(a_t, 0.0)
                if mode == "soft":
                    y_prev = expit(self.steepness * (s_prev + b))
                else:
                    y_prev = (s_prev + b >= 0).astype(float)
                a[:, t], s[:, t], y[:, t] = a_t, s_prev, y_prev
            if keep:
                cache.append((h, a, s, y))
            h = y
        return (h, cache) if keep else h

    # ------------------------------------------------------------ loss

    def loss_and_grads(self, x: np.ndarray, z: np.ndarray, class_weight=None,
                       mode: str = "surrogate", pos_weight: float = 1.0):
        """Mean per-sample BCE summed over steps and outputs, plus its gradients.

        ``z`` is the target (B, T, n_out); ``class_weight`` optionally scales
        each sample's loss (shape (B,)); ``pos_weight`` scales the terms at
        target spikes.
        """
        if mode not in ("soft", "surrogate"):
            raise ValueError(f"cannot differentiate mode {mode!r}")
        _, cache = self.forward(x, mode=mode, keep=True)
        k = self.steepness
        B = len(x)
        wsample = np.ones(B) if class_weight is None else np.asarray(class_weight, float)
        _, _, s_out, y_out = cache[-1]
        logits = k * (s_out + self.biases[-1])
        bce = pos_weight * z * np.logaddexp(0.0, -logits) + (1.0 - z) * np.logaddexp(0.0, logits)
        loss = float((bce.sum(axis=(1, 2)) * wsample).sum() / B)

        p = expit(logits)
        d_logit = (1.0 - z) * p - pos_weight * z * (1.0 - p)
        ext_logit = d_logit * (wsample / B)[:, None, None]
        ext_y = None
        grads = [None] * (2 * len(self.weights))
        for i in reversed(range(len(self.weights))):
            inp, a, s, y = cache[i]
            W, b = self.weights[i], self.biases[i]
            gW, gb, g_in = self._layer_backward(inp, a, s, y, b, ext_y, ext_logit, W)
            grads[2 * i], grads[2 * i + 1] = gW, gb
            ext_y, ext_logit = g_in, None
        return loss, grads

    def _layer_backward(self, inp, a, s, y, b, ext_y, ext_logit, W):
        k, leak = self.steepness, self.leak
        B, T, H = a.shape
        sig = expit(k * (s + b))
        dy = sig * (1.0 - sig)
        g_a = np.empty((B, T, H))
        ga_next = np.zeros((B, H))
        g_logit_sum = np.zeros(H)
        for t in reversed(range(T)):
            gy = -leak * s[:, t] * ga_next
            if ext_y is not None:
                gy = gy + ext_y[:, t]
            g_logit = gy * dy[:, t]
            if ext_logit is not None:
                g_logit = g_logit + ext_logit[:, t]
            gs = k * g_logit + leak * (1.0 - y[:, t]) * ga_next
            ga = gs * (a[:, t] > 0)
            g_a[:, t] = ga
            g_logit_sum += g_logit.sum(axis=0)
            ga_next = ga
        gW = np.einsum("bth,bti->hi", g_a, inp, optimize=True)
        gb = k * g_logit_sum
        g_in = g_a @ W
        return gW, gb, g_in
