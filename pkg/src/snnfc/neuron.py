"""Neuron models on a fixed one-step grid: LIF, SRM and the spiking neural unit."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit


# ---------------------------------------------------------------- LIF

@dataclass(frozen=True)
class LIFState:
    membrane: np.ndarray
    refractory_remaining: np.ndarray
    threshold: float | np.ndarray = 1.0
    leak_factor: float = 0.9
    resting: float = 0.0
    refractory: int = 2

    @classmethod
    def rest(cls, n: int, **kw) -> "LIFState":
        resting = kw.get("resting", 0.0)
        return cls(np.full(n, float(resting)), np.zeros(n, dtype=np.int64), **kw)


def lif_step(state: LIFState, input_current) -> tuple[LIFState, np.ndarray]:
    """Advance every neuron by one step.

    Non-refractory membranes leak toward rest and integrate the input; those
    reaching threshold spike, reset to rest and turn refractory.
    """
    active = state.refractory_remaining == 0
    v = state.resting + state.leak_factor * (state.membrane - state.resting) + input_current
    v = np.where(active, v, state.membrane)
    spikes = active & (v >= state.threshold)
    v = np.where(spikes, state.resting, v)
    ref = np.where(spikes, state.refractory, np.maximum(state.refractory_remaining - 1, 0))
    return replace(state, membrane=v, refractory_remaining=ref), spikes.astype(np.uint8)


# ---------------------------------------------------------------- SRM

@dataclass(frozen=True)
class SRMKernels:
    """Double-exponential PSP kernel and exponential reset kernel (in steps).

    eps(s) = c * (exp(-s/tau_m) - exp(-s/tau_s)) for s >= 0, scaled to peak 1.
    kappa(s) = kappa_amplitude * exp(-s/kappa_tau) for s >= 1, zero at s = 0.
    """

    eps_tau_m: float = 10.0
    eps_tau_s: float = 2.5
    kappa_tau: float = 10.0
    kappa_amplitude: float = -5.0
    beta: float = 1.0

    @property
    def eps_scale(self) -> float:
        tm, ts = self.eps_tau_m, self.eps_tau_s
        s_peak = np.log(tm / ts) * tm * ts / (tm - ts)
        return 1.0 / (np.exp(-s_peak / tm) - np.exp(-s_peak / ts))

    def eps(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        val = self.eps_scale * (np.exp(-s / self.eps_tau_m) - np.exp(-s / self.eps_tau_s))
        return np.where(s >= 0, val, 0.0)

    def kappa(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.where(s >= 1, self.kappa_amplitude * np.exp(-s / self.kappa_tau), 0.0)

    def to_dict(self) -> dict:
        return dict(eps_tau_m=self.eps_tau_m, eps_tau_s=self.eps_tau_s,
                    kappa_tau=self.kappa_tau, kappa_amplitude=self.kappa_amplitude,
                    beta=self.beta)


def _exp_filter(x: np.ndarray, tau: float) -> np.ndarray:
    """y[t] = exp(-1/tau) * y[t-1] + x[t] along the last axis."""
    from scipy.signal import lfilter
    return lfilter([1.0], [1.0, -np.exp(-1.0 / tau)], x, axis=-1)


def psp(spikes: np.ndarray, kernels: SRMKernels) -> np.ndarray:
    """(spikes * eps)(t) for every train, computed with two recursive filters."""
    x = np.asarray(spikes, dtype=float)
    return kernels.eps_scale * (_exp_filter(x, kernels.eps_tau_m) - _exp_filter(x, kernels.eps_tau_s))


def reset_term(own_spikes: np.ndarray, kernels: SRMKernels) -> np.ndarray:
    """(own_spikes * kappa)(t); a spike at t only affects steps after t."""
    z = np.asarray(own_spikes, dtype=float)
    return kernels.kappa_amplitude * (_exp_filter(z, kernels.kappa_tau) - z)


def srm_membrane(w: np.ndarray, input_spikes: np.ndarray, own_spikes: np.ndarray,
                 kernels: SRMKernels | None = None) -> np.ndarray:
    """u_j(t) = sum_n w_jn (Y_n * eps)(t) + (Z_j * kappa)(t).

    ``w`` is (post, pre), ``input_spikes`` is (pre, T), ``own_spikes`` is (post, T).
    """
    kernels = kernels or SRMKernels()
    return np.asarray(w) @ psp(input_spikes, kernels) + reset_term(own_spikes, kernels)


def spike_probability(u, beta: float = 1.0):
    """Logistic escape rate 1 / (1 + exp(-beta u)), stable for large |beta u|."""
    return expit(beta * np.asarray(u, dtype=float))


# ---------------------------------------------------------------- SNU

def relu(x):
    return np.maximum(x, 0.0)


def step(x):
    return (np.asarray(x) >= 0).astype(float)


@dataclass
class SNUParams:
    """One layer of spiking neural units.

    ``W`` is (post, pre), ``b`` is the (negative) threshold per neuron.
    ``steepness`` selects the output nonlinearity: None for the hard step,
    a positive number for the sigmoid ``1 / (1 + exp(-steepness * x))``.
    """

    W: np.ndarray
    b: np.ndarray
    leak: float = 0.8
    steepness: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.leak < 1.0:
            raise ValueError("leak must lie in [0, 1)")

    def h(self, x):
        if self.steepness is None:
            return step(x)
        return expit(self.steepness * x)


def snu_step(params: SNUParams, x_t, s_prev, y_prev):
    """s_t = g(W x_t + l * s_{t-1} * (1 - y_{t-1})),  y_t = h(s_t + b) with g = relu."""
    s = relu(np.asarray(x_t) @ params.W.T + params.leak * s_prev * (1.0 - y_prev))
    return s, params.h(s + params.b)


def snu_run(params: SNUParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run one layer over inputs (..., T, pre); returns states and outputs (..., T, post)."""
    x = np.asarray(x, dtype=float)
    T = x.shape[-2]
    drive = x @ params.W.T
    s = np.zeros(drive.shape)
    y = np.zeros(drive.shape)
    s_prev = np.zeros(drive.shape[:-2] + drive.shape[-1:])
    y_prev = np.zeros_like(s_prev)
    for t in range(T):
        s_prev = relu(drive[..., t, :] + params.leak * s_prev * (1.0 - y_prev))
        y_prev = params.h(s_prev + params.b)
        s[..., t, :] = s_prev
        y[..., t, :] = y_prev
    return s, y
