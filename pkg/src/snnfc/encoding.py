"""Correlative temporal encoding of key-value records into spike patterns.

Every key owns a fixed block of ``n_per_key`` input neurons. Every (key, value)
pair owns a fixed pseudo-random sub-pattern on that block, so records that
share pairs share the corresponding rows of their input spike pattern.

Spike patterns are plain ``uint8`` arrays of shape (neurons, steps); batches
put the record axis first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .dataset import FeatureSchema, KeyValueRecord

N_STEPS = 80
N_PER_KEY = 20
SPIKE_RATE = 4.0
VR_TAU = 10.0


def _philox(*words: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(w) for w in words])))


@dataclass(frozen=True)
class CTEConfig:
    n_per_key: int = N_PER_KEY
    n_steps: int = N_STEPS
    spike_rate: float = SPIKE_RATE
    master_seed: int = 0

    def __post_init__(self):
        if self.n_per_key < 1 or self.n_steps < 1:
            raise ValueError("n_per_key and n_steps must be positive")
        if not 0 < self.spike_rate <= self.n_steps:
            raise ValueError("spike_rate must lie in (0, n_steps]")


@dataclass
class CTECodebook:
    """Neuron groups and sub-patterns for one schema.

    ``patterns[k]`` has shape (cardinality_k, n_per_key, n_steps). Only the
    config and the cardinalities are needed to rebuild it.
    """

    config: CTEConfig
    cardinalities: tuple[int, ...]
    patterns: list[np.ndarray] = field(repr=False)

    @property
    def n_keys(self) -> int:
        return len(self.cardinalities)

    @property
    def n_inputs(self) -> int:
        return self.n_keys * self.config.n_per_key

    def group(self, k: int) -> slice:
        n = self.config.n_per_key
        return slice(k * n, (k + 1) * n)

    def to_dict(self) -> dict:
        c = self.config
        return {"version": 1, "n_per_key": c.n_per_key, "n_steps": c.n_steps,
                "spike_rate": c.spike_rate, "master_seed": c.master_seed,
                "cardinalities": list(self.cardinalities)}

    @classmethod
    def from_dict(cls, d: dict) -> "CTECodebook":
        cfg = CTEConfig(d["n_per_key"], d["n_steps"], d["spike_rate"], d["master_seed"])
        return _build(cfg, tuple(d["cardinalities"]))


def _build(config: CTEConfig, cardinalities) -> CTECodebook:
    p = config.spike_rate / config.n_steps
    patterns = []
    for k, card in enumerate(cardinalities):
        block = np.empty((card, config.n_per_key, config.n_steps), dtype=np.uint8)
        for v in range(card):
            for j in range(config.n_per_key):
                rng = _philox(config.master_seed, k, v, j)
                block[v, j] = rng.random(config.n_steps) < p
        patterns.append(block)
    return CTECodebook(config, tuple(int(c) for c in cardinalities), patterns)


def build_codebook(schema: FeatureSchema, config: CTEConfig | None = None) -> CTECodebook:
    return _build(config or CTEConfig(), schema.cardinalities)


def encode_record(record: KeyValueRecord, codebook: CTECodebook) -> np.ndarray:
    return encode_batch(np.asarray([record.values]), codebook)[0]


def encode_batch(values: np.ndarray, codebook: CTECodebook) -> np.ndarray:
    """(N, K) value identifiers -> (N, K * n_per_key, n_steps) spike patterns."""
    values = np.asarray(values)
    if values.ndim != 2 or values.shape[1] != codebook.n_keys:
        raise ValueError(f"expected (N, {codebook.n_keys}) values, got {values.shape}")
    cfg = codebook.config
    out = np.empty((len(values), codebook.n_inputs, cfg.n_steps), dtype=np.uint8)
    for k, block in enumerate(codebook.patterns):
        col = values[:, k]
        if np.any(col < 0) or np.any(col >= len(block)):
            raise ValueError(f"value identifier out of range for key {k}")
        out[:, codebook.group(k)] = block[col]
    return out


# ---------------------------------------------------------------- distances

def kernel_traces(spikes: np.ndarray, tau: float = VR_TAU) -> np.ndarray:
    """Causal exponential filtering along the last axis.

    trace[t] = trace[t-1] * exp(-1/tau) + spikes[t]
    """
    decay = np.exp(-1.0 / tau)
    return lfilter([1.0], [1.0, -decay], np.asarray(spikes, dtype=float), axis=-1)


def van_rossum_distance(a: np.ndarray, b: np.ndarray, tau: float = VR_TAU) -> float:
    """Discrete van Rossum distance between two equally shaped spike patterns."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if tau <= 0:
        raise ValueError("tau must be positive")
    diff = kernel_traces(a.astype(float) - b.astype(float), tau)
    return float(np.sqrt(np.sum(diff**2) / tau))


def van_rossum_matrix(outputs: np.ndarray, targets: np.ndarray, tau: float = VR_TAU) -> np.ndarray:
    """Distances between every output (B, n, T) and every target (M, n, T) -> (B, M)."""
    fo = kernel_traces(outputs, tau).reshape(len(outputs), -1)
    ft = kernel_traces(targets, tau).reshape(len(targets), -1)
    d2 = np.stack([((fo - t) ** 2).sum(1) for t in ft], axis=1)
    return np.sqrt(d2 / tau)


# ---------------------------------------------------------------- targets

@dataclass
class TargetPatternSet:
    patterns: np.ndarray  # (M, n_out, n_steps) uint8
    seed: int
    attempts: int = 1
    spikes_per_neuron: int = 4
    floor: float = 1.0
    tau: float = VR_TAU

    @property
    def n_classes(self) -> int:
        return len(self.patterns)

    @property
    def n_out(self) -> int:
        return self.patterns.shape[1]

    @property
    def n_steps(self) -> int:
        return self.patterns.shape[2]

    def class_of_neuron(self) -> np.ndarray:
        return _class_blocks(self.n_classes, self.n_out)

    def to_dict(self) -> dict:
        return {"version": 1, "n_classes": self.n_classes, "n_out": self.n_out,
                "n_steps": self.n_steps, "seed": self.seed,
                "spikes_per_neuron": self.spikes_per_neuron, "floor": self.floor,
                "tau": self.tau}

    @classmethod
    def from_dict(cls, d: dict) -> "TargetPatternSet":
        return generate_targets(d["n_classes"], d["n_out"], d["n_steps"], d["seed"],
                                spikes_per_neuron=d["spikes_per_neuron"],
                                floor=d["floor"], tau=d["tau"])


class TargetGenerationError(RuntimeError):
    pass


def _class_blocks(M: int, n_out: int) -> np.ndarray:
    return (np.arange(n_out) * M) // n_out


def generate_targets(M: int, n_out: int, n_steps: int = N_STEPS, seed: int = 0, *,
                     spikes_per_neuron: int = 4, floor: float = 1.0, tau: float = VR_TAU,
                     earliest: int | None = None, max_attempts: int = 100) -> TargetPatternSet:
    """One target pattern per class over ``n_out`` output neurons.

    Output neurons are split into contiguous per-class blocks; each neuron of
    class c fires ``spikes_per_neuron`` times at distinct pseudo-random steps
    in its own class's target and stays silent in all others. When
    ``n_out < M`` every class draws spikes on all neurons instead. Patterns
    are redrawn until all pairwise distances exceed ``floor``.
    """
    if M < 1 or n_out < 1:
        raise ValueError("need at least one class and one output neuron")
    if earliest is None:
        earliest = n_steps // 8
    window = np.arange(earliest, n_steps)
    k = min(spikes_per_neuron, len(window))
    owner = _class_blocks(M, n_out) if n_out >= M else None
    for attempt in range(max_attempts):
        rng = _philox(seed, attempt)
        pats = np.zeros((M, n_out, n_steps), dtype=np.uint8)
        for c in range(M):
            rows = np.flatnonzero(owner == c) if owner is not None else np.arange(n_out)
            for j in rows:
                pats[c, j, rng.choice(window, size=k, replace=False)] = 1
        d = van_rossum_matrix(pats, pats, tau)
        off = d[~np.eye(M, dtype=bool)]
        if off.size == 0 or off.min() > floor:
            return TargetPatternSet(pats, seed, attempt + 1, spikes_per_neuron, floor, tau)
    raise TargetGenerationError(
        f"no target set with separation > {floor} after {max_attempts} attempts; "
        f"n_out * n_steps = {n_out * n_steps} is too small")


# ---------------------------------------------------------------- decoders

def decode_rate(output: np.ndarray, class_map) -> int:
    """Class of the most active output neuron; ties go to the lowest neuron index."""
    counts = np.asarray(output).sum(axis=-1)
    return int(np.asarray(class_map)[int(np.argmax(counts))])


def decode_rate_batch(outputs: np.ndarray, class_map) -> np.ndarray:
    counts = np.asarray(outputs).sum(axis=-1)
    return np.asarray(class_map)[np.argmax(counts, axis=1)]


def decode_temporal(output: np.ndarray, targets: TargetPatternSet, tau: float | None = None) -> int:
    return int(decode_temporal_batch(np.asarray(output)[None], targets, tau)[0])


def decode_temporal_batch(outputs: np.ndarray, targets: TargetPatternSet,
                          tau: float | None = None) -> np.ndarray:
    """Nearest target under the van Rossum distance; ties go to the lowest class."""
    outputs = np.asarray(outputs)
    if outputs.shape[1:] != targets.patterns.shape[1:]:
        raise ValueError(f"output shape {outputs.shape[1:]} != target shape "
                         f"{targets.patterns.shape[1:]}")
    d = van_rossum_matrix(outputs, targets.patterns, targets.tau if tau is None else tau)
    return np.argmin(d, axis=1)
