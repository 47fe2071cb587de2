"""Probabilistic backpropagation for stochastic spike-response-model networks.

Every neuron fires at step t with probability rho(u(t)) = sigmoid(beta u(t)).
Training maximises the log-likelihood of the target output trains:

    sum_t  z(t) log rho(u(t)) + (1 - z(t)) log(1 - rho(u(t)))

Output neurons are teacher-forced (their reset term uses the target train),
which makes the output-layer gradient exact. Hidden neurons sample their
spikes; their credit comes from the expected-PSP route: the output error is
sent back through w_out, filtered anti-causally with the PSP kernel and
scaled by d rho / d u of the hidden neuron.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..neuron import SRMKernels, psp


@dataclass
class SRMNetwork:
    weights: list[np.ndarray]  # (post, pre)
    kernels: SRMKernels

    @classmethod
    def init(cls, sizes, rng: np.random.Generator, kernels: SRMKernels | None = None):
        weights = []
        for pre, post in zip(sizes[:-1], sizes[1:]):
            lim = 1.0 / np.sqrt(pre)
            weights.append(rng.uniform(-lim, lim, size=(post, pre)))
        return cls(weights, kernels or SRMKernels())

    def _layer(self, W, x_psp, rng, teacher=None):
        """Spikes of one layer given presynaptic PSPs (B, pre, T).

        ``rng`` None means deterministic firing (rho > 1/2); ``teacher``
        fixes the spike train instead of generating it.
        Returns (spikes, u) both (B, post, T).
        """
        k = self.kernels
        drive = np.einsum("ji,bit->bjt", W, x_psp, optimize=True)
        B, J, T = drive.shape
        u = np.empty_like(drive)
        z = np.empty_like(drive)
        decay = np.exp(-1.0 / k.kappa_tau)
        trace = np.zeros((B, J))
        for t in range(T):
            u_t = drive[:, :, t] + k.kappa_amplitude * decay * trace
            if teacher is not None:
                z_t = teacher[:, :, t]
            elif rng is None:
                z_t = (u_t > 0).astype(float)
            else:
                z_t = (rng.random(u_t.shape) < expit(k.beta * u_t)).astype(float)
            trace = decay * trace + z_t
            u[:, :, t] = u_t
            z[:, :, t] = z_t
        return z, u

    def forward(self, x: np.ndarray, rng=None, teacher=None):
        """x: input spikes (B, n_in, T). Returns per-layer (psp_in, spikes, u)."""
        h = np.asarray(x, dtype=float)
        layers = []
        for i, W in enumerate(self.weights):
            x_psp = psp(h, self.kernels)
            last = i == len(self.weights) - 1
            z, u = self._layer(W, x_psp, rng, teacher if last else None)
            layers.append((x_psp, z, u))
            h = z
        return layers

    def predict_spikes(self, x, rng=None) -> np.ndarray:
        return self.forward(x, rng=rng)[-1][1]

    def nll_and_grads(self, x, z_target, rng=None, frozen_hidden=None):
        """Negative log-likelihood per sample (mean over batch) and its gradients.

        ``frozen_hidden`` replaces the sampled hidden spike trains (for
        gradient checks with fixed noise).
        """
        k = self.kernels
        B = len(x)
        h = np.asarray(x, dtype=float)
        hidden = []
        for i, W in enumerate(self.weights[:-1]):
            x_psp = psp(h, k)
            if frozen_hidden is not None:
                z, u = self._layer(W, x_psp, None, teacher=frozen_hidden[i])
            else:
                z, u = self._layer(W, x_psp, rng)
            hidden.append((x_psp, z, u))
            h = z
        out_psp = psp(h, k)
        _, u_out = self._layer(self.weights[-1], out_psp, None, teacher=z_target)
        bu = k.beta * u_out
        nll = float(np.sum(np.logaddexp(0.0, -bu) * z_target
                           + np.logaddexp(0.0, bu) * (1.0 - z_target)) / B)
        # d nll / d u_out
        delta = -k.beta * (z_target - expit(bu)) / B
        grads = [None] * len(self.weights)
        grads[-1] = np.einsum("bjt,bit->ji", delta, out_psp, optimize=True)
        for i in reversed(range(len(hidden))):
            x_psp, z_h, u_h = hidden[i]
            W_above = self.weights[i + 1]
            err = np.einsum("bjt,ji->bit", delta, W_above, optimize=True)
            # sum_{t >= t'} eps(t - t') err(t): filter the time-reversed signal
            back = psp(err[..., ::-1], k)[..., ::-1]
            rho = expit(k.beta * u_h)
            delta = back * k.beta * rho * (1.0 - rho)
            grads[i] = np.einsum("bjt,bit->ji", delta, x_psp, optimize=True)
        return nll, grads
