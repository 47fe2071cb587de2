"""Training configuration, trained-model container and the model file format."""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..encoding import CTEConfig

FORMAT_VERSION = 1
KINDS = ("stdp-unsup", "stdp-sup", "prob-bp", "snu-bp", "logreg")


class TrainingError(RuntimeError):
    pass


@dataclass
class StdpParams:
    n_neurons: int = 40  # unsupervised layer size; supervised uses neurons_per_class * M
    a_plus: float = 0.01
    a_minus: float = 0.001  # well below a_plus, so a repeated pattern is learned
    tau_plus: float = 20.0
    tau_minus: float = 20.0
    w_min: float = 0.0
    w_max: float = 1.0
    inhibition: float = 1.0
    theta_plus: float = 0.001
    theta_decay: float = 1e-4  # per step
    threshold: float = 1.0
    leak: float = 0.9
    refractory: int = 2
    input_gain: float = 0.25
    teacher_current: float = 0.5
    weight_norm: float | None = 0.1  # target mean weight per neuron after each sample
    assign: str = "total"  # unsupervised labelling: "total" or "mean" response
    # supervised runs: teacher-driven spikes would push thresholds up in proportion
    # to class frequency, and per-neuron normalisation erases that frequency
    sup_theta_plus: float = 0.0
    sup_weight_norm: float | None = None


@dataclass
class SRMParams:
    eps_tau_m: float = 10.0
    eps_tau_s: float = 2.5
    kappa_tau: float = 10.0
    kappa_amplitude: float = -5.0
    beta: float = 1.0
    sampled_eval: bool = False


@dataclass
class SNUTrainParams:
    leak: float = 0.9
    steepness: float = 5.0
    bias_init: float = -0.3
    pos_weight: float = 10.0
    clip_norm: float = 50.0
    cosine_decay: bool = True
    # clip each layer to +-k std(W) after every update; a compact range
    # spends less of the conductance window on rare large weights
    weight_clip: float | None = 3.0


@dataclass
class TargetParams:
    neurons_per_class: int = 1
    spikes_per_neuron: int = 4
    floor: float = 1.0
    tau: float = 10.0
    seed: int = 0


@dataclass
class TrainConfig:
    kind: str = "snu-bp"
    hidden: list[int] = field(default_factory=list)
    learning_rate: float = 0.05
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    cte: CTEConfig = field(default_factory=CTEConfig)
    targets: TargetParams = field(default_factory=TargetParams)
    stdp: StdpParams = field(default_factory=StdpParams)
    srm: SRMParams = field(default_factory=SRMParams)
    snu: SNUTrainParams = field(default_factory=SNUTrainParams)
    l2: float = 1e-2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")

    @property
    def temporal(self) -> bool:
        return self.kind in ("prob-bp", "snu-bp")

    def layer_sizes(self, n_in: int, n_classes: int) -> list[int]:
        return [n_in, *self.hidden, n_classes * self.targets.neurons_per_class]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        nested = {"cte": CTEConfig, "targets": TargetParams, "stdp": StdpParams,
                  "srm": SRMParams, "snu": SNUTrainParams}
        kw = {}
        names = {f.name for f in fields(cls)}
        for k, v in d.items():
            if k not in names:
                raise ValueError(f"unknown config field {k!r}")
            kw[k] = nested[k](**v) if k in nested and isinstance(v, dict) else v
        return cls(**kw)


def config_hash(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class TrainedModel:
    """Everything needed to rerun inference.

    ``arrays`` holds the learned parameters as float64 arrays (layer weights
    ``W0, W1, ...``, biases ``b0, ...``, thresholds ``theta`` and similar);
    ``decoder`` is either ``{"class_map": [...]}`` or ``{"targets": {...}}``.
    """

    kind: str
    config: TrainConfig
    schema: dict
    codebook: dict
    arrays: dict[str, np.ndarray]
    decoder: dict
    manifest: dict = field(default_factory=dict)

    @property
    def encoding_hash(self) -> str:
        return config_hash({"schema": self.schema, "codebook": self.codebook})

    def layer_weights(self) -> list[np.ndarray]:
        n = sum(1 for k in self.arrays if k.startswith("W"))
        return [self.arrays[f"W{i}"] for i in range(n)]

    def layer_biases(self) -> list[np.ndarray]:
        n = sum(1 for k in self.arrays if k.startswith("b"))
        return [self.arrays[f"b{i}"] for i in range(n)]


def save_model(model: TrainedModel, path) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "config": model.config.to_dict(),
        "schema": model.schema,
        "codebook": model.codebook,
        "decoder": model.decoder,
        "manifest": model.manifest,
        "encoding_hash": model.encoding_hash,
        "layer_sizes": [list(a.shape) for a in model.layer_weights()],
    }
    arrays = {f"array_{k}": np.ascontiguousarray(v, dtype=np.float64)
              for k, v in model.arrays.items()}
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
             **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_model(path) -> TrainedModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(z["meta"].tobytes().decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {meta.get('format_version')}")
        arrays = {k[len("array_"):]: z[k].copy() for k in z.files if k.startswith("array_")}
    return TrainedModel(meta["kind"], TrainConfig.from_dict(meta["config"]), meta["schema"],
                        meta["codebook"], arrays, meta["decoder"], meta["manifest"])
