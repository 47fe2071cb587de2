"""Inference of trained SNU networks on simulated memristive crossbars.

Each signed weight matrix is programmed onto a differential pair of
conductance arrays in [0, g_max] µS. Programming adds conductance-dependent
Gaussian noise whose standard deviation is a quadratic polynomial of the
target conductance. Column currents are digitised to signed 8-bit codes
and mapped back to the pre-activation range observed on training data
before the software neuron applies its nonlinearity.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .encoding import CTECodebook, encode_batch
from .learning.model import TrainedModel
from .learning.train import EVAL_BATCH, predict, snu_network

G_MAX = 25.0
ADC_LEVELS = 127


class UncalibratedError(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """sigma(g) = c0 + c1 g + c2 g^2 in µS, multiplied by ``noise_scale``.

    The default coefficients are placeholders for a measured device fit.
    """

    c0: float = 0.3
    c1: float = 0.05
    c2: float = -0.0008
    noise_scale: float = 1.0
    seed: int = 0
    g_max: float = G_MAX
    per_sample: bool = False

    def __post_init__(self):
        g = np.linspace(0.0, self.g_max, 1001)
        if np.any(self.sigma(g) < 0):
            raise ValueError("noise polynomial is negative inside [0, g_max]")

    def sigma(self, g):
        g = np.asarray(g, dtype=float)
        return self.c0 + self.c1 * g + self.c2 * g * g

    def with_scale(self, scale: float, seed: int | None = None) -> "NoiseModel":
        return NoiseModel(self.c0, self.c1, self.c2, scale,
                          self.seed if seed is None else seed, self.g_max, self.per_sample)


@dataclass
class CrossbarConfig:
    g_max: float = G_MAX
    adc_levels: int | None = ADC_LEVELS  # None: ideal read-out without quantisation
    percentile: float = 99.9
    weight_scales: list[float] = field(default_factory=list)
    output_scales: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Crossbar:
    g_plus: np.ndarray
    g_minus: np.ndarray
    scale: float


def map_weights(W: np.ndarray, g_max: float = G_MAX) -> tuple[np.ndarray, np.ndarray, float]:
    """Differential conductances with the largest |w| mapped to ``g_max``."""
    W = np.asarray(W, dtype=float)
    if not np.all(np.isfinite(W)):
        raise ValueError("weights must be finite")
    wmax = np.max(np.abs(W)) if W.size else 0.0
    if wmax == 0.0:
        return np.zeros_like(W), np.zeros_like(W), 1.0
    with np.errstate(over="ignore"):
        scale = g_max / wmax
    if not np.isfinite(scale):
        raise ValueError(f"max |w| = {wmax:g} is too small to map")
    G = W / wmax * g_max
    return np.where(W > 0, G, 0.0), np.where(W < 0, -G, 0.0), float(scale)


def apply_noise(G: np.ndarray, noise: NoiseModel, rng: np.random.Generator | None = None) -> np.ndarray:
    """G + noise_scale * sigma(G) * N(0, 1), clipped to [0, g_max]."""
    G = np.asarray(G, dtype=float)
    if noise.noise_scale == 0:
        return G.copy()
    rng = rng or np.random.default_rng(noise.seed)
    noisy = G + noise.noise_scale * noise.sigma(G) * rng.standard_normal(G.shape)
    return np.clip(noisy, 0.0, noise.g_max)


def quantize(analog: np.ndarray, output_scale: float, levels: int = ADC_LEVELS) -> np.ndarray:
    q = np.rint(analog / output_scale * levels)
    return np.clip(q, -levels, levels).astype(np.int64)


def crossbar_forward(x, g_plus, g_minus, scale: float, output_scale: float | None,
                     adc_levels: int | None = ADC_LEVELS):
    """Returns (codes, rescaled). With ``adc_levels`` None codes is None and
    rescaled is the ideal analog product."""
    analog = np.asarray(x, dtype=float) @ (g_plus - g_minus).T / scale
    if adc_levels is None:
        return None, analog
    if output_scale is None:
        raise UncalibratedError("layer output scale has not been calibrated")
    q = quantize(analog, output_scale, adc_levels)
    return q, q * (output_scale / adc_levels)


def calibrate(model: TrainedModel, values, percentile: float = 99.9) -> list[float]:
    """Per-layer output scale: a high percentile of |W x_t| on the given records."""
    net = snu_network(model)
    cb = CTECodebook.from_dict(model.codebook)
    samples = [[] for _ in net.weights]

    def record(i, h):
        drive = h @ net.weights[i].T
        samples[i].append(np.abs(drive).ravel())
        return drive

    for i in range(0, len(values), EVAL_BATCH):
        x = encode_batch(values[i:i + EVAL_BATCH], cb).transpose(0, 2, 1)
        net.forward(x, mode="hard", linear=record)
    scales = []
    for s in samples:
        v = float(np.percentile(np.concatenate(s), percentile))
        scales.append(v if v > 0 else 1.0)
    return scales


def program(model: TrainedModel, noise: NoiseModel, rng: np.random.Generator) -> list[Crossbar]:
    bars = []
    for W in model.layer_weights():
        gp, gm, scale = map_weights(W, noise.g_max)
        bars.append(Crossbar(apply_noise(gp, noise, rng), apply_noise(gm, noise, rng), scale))
    return bars


def hw_predict(model: TrainedModel, values, noise: NoiseModel, config: CrossbarConfig) -> np.ndarray:
    if model.kind != "snu-bp":
        raise ValueError("the crossbar simulator runs SNU models only")
    if config.adc_levels is not None and len(config.output_scales) != len(model.layer_weights()):
        raise UncalibratedError("calibrate output scales before hardware inference")
    rng = np.random.default_rng(noise.seed)
    values = np.asarray(values)

    def run(vals, bars):
        config.weight_scales = [b.scale for b in bars]

        def linear(i, h):
            scale = config.output_scales[i] if config.output_scales else None
            return crossbar_forward(h, bars[i].g_plus, bars[i].g_minus, bars[i].scale,
                                    scale, config.adc_levels)[1]
        return predict(model, vals, linear)

    if not noise.per_sample:
        return run(values, program(model, noise, rng))
    return np.concatenate([run(values[i:i + 1], program(model, noise, rng))
                           for i in range(len(values))])


def hw_evaluate(model: TrainedModel, values, labels, noise: NoiseModel,
                config: CrossbarConfig) -> float:
    """Accuracy with every synaptic product replaced by the crossbar read-out.

    Devices are programmed once per call, so every record sees the same
    noisy conductances unless ``noise.per_sample`` is set.
    """
    labels = np.asarray(labels)
    return float(np.mean(hw_predict(model, values, noise, config) == labels))
