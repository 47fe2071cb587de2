"""Key-value record datasets: UCI loaders, numeric binning, splits, one-hot."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

MISSING = "?"
CATEGORICAL = "categorical"
NUMERIC = "numeric"


class DataError(ValueError):
    """Raised for unreadable, malformed or inconsistent dataset input."""


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered keys, their value sets and the class labels of one dataset.

    Categorical keys enumerate their tokens; the explicit missing token ``?``
    is appended when absent. Numeric keys carry bin edges, and their value
    identifiers are bin indices ``0..len(edges)`` plus one trailing missing bin.
    """

    keys: tuple[str, ...]
    kinds: tuple[str, ...]
    categories: tuple[tuple[str, ...], ...]
    class_names: tuple[str, ...]
    bin_edges: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.keys)) != len(self.keys):
            raise DataError("schema keys must be unique")
        if not (len(self.keys) == len(self.kinds) == len(self.categories)):
            raise DataError("keys, kinds and categories must align")
        if len(self.class_names) < 2:
            raise DataError("a schema needs at least two classes")
        cats = []
        for kind, values in zip(self.kinds, self.categories):
            if kind not in (CATEGORICAL, NUMERIC):
                raise DataError(f"unknown key kind {kind!r}")
            values = tuple(values)
            if kind == CATEGORICAL and MISSING not in values:
                values = values + (MISSING,)
            cats.append(values)
        object.__setattr__(self, "categories", tuple(cats))
        for key, edges in self.bin_edges.items():
            if np.any(np.diff(edges) <= 0):
                raise DataError(f"bin edges of {key!r} must be strictly increasing")

    @property
    def n_keys(self) -> int:
        return len(self.keys)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def cardinality(self, k: int) -> int:
        if self.kinds[k] == NUMERIC:
            edges = self.bin_edges.get(self.keys[k])
            if edges is None:
                raise DataError(f"numeric key {self.keys[k]!r} has no bin edges")
            return len(edges) + 2  # len+1 bins, then the missing bin
        return len(self.categories[k])

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(self.cardinality(k) for k in range(self.n_keys))

    def with_edges(self, edges: dict[str, Sequence[float]]) -> "FeatureSchema":
        merged = dict(self.bin_edges)
        merged.update({k: tuple(float(e) for e in v) for k, v in edges.items()})
        return FeatureSchema(self.keys, self.kinds, self.categories, self.class_names, merged)

    def to_dict(self) -> dict:
        return {
            "keys": list(self.keys),
            "kinds": list(self.kinds),
            "categories": [list(c) for c in self.categories],
            "class_names": list(self.class_names),
            "bin_edges": {k: list(v) for k, v in self.bin_edges.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            tuple(d["keys"]),
            tuple(d["kinds"]),
            tuple(tuple(c) for c in d["categories"]),
            tuple(d["class_names"]),
            {k: tuple(v) for k, v in d.get("bin_edges", {}).items()},
        )


class KeyValueRecord(NamedTuple):
    values: tuple[int, ...]
    label: int


@dataclass
class Dataset:
    """Records stored column-wise: ``values`` is (N, K) int, ``labels`` is (N,).

    ``test_start`` marks an official train/test boundary (rows before it are
    the training file); when it is None the split is drawn with ``split_seed``.
    """

    schema: FeatureSchema
    values: np.ndarray
    labels: np.ndarray
    split_seed: int = 0
    train_fraction: float = 0.8
    test_start: int | None = None
    n_unknown: int = 0

    def __len__(self):
        return len(self.labels)

    def record(self, i: int) -> KeyValueRecord:
        return KeyValueRecord(tuple(int(v) for v in self.values[i]), int(self.labels[i]))

    def subset(self, idx) -> "Dataset":
        return Dataset(self.schema, self.values[idx], self.labels[idx],
                       self.split_seed, self.train_fraction)

    def majority_fraction(self) -> float:
        return float(np.bincount(self.labels, minlength=self.schema.n_classes).max() / len(self))


def bin_numeric(value: float, edges: Sequence[float]) -> int:
    """Index of the half-open bin ``[edge_i, edge_{i+1})`` holding ``value``.

    >>> bin_numeric(37.0, [25.0, 45.0, 65.0])
    1
    """
    if math.isnan(value):
        raise DataError("cannot bin NaN")
    if len(edges) == 0:
        raise DataError("bin edges must be non-empty")
    return int(np.searchsorted(np.asarray(edges, dtype=float), value, side="right"))


def quantile_edges(values: Sequence[float], n_bins: int = 8) -> tuple[float, ...]:
    """Interior quantile cut points; duplicate cuts collapse so no bin is empty."""
    v = np.asarray(values, dtype=float)
    qs = np.quantile(v, np.arange(1, n_bins) / n_bins)
    edges = np.unique(qs)
    # a cut at the minimum would leave bin 0 empty
    edges = edges[edges > v.min()]
    if len(edges) == 0:
        edges = np.array([v.min() + 0.5])
    return tuple(float(e) for e in edges)


def read_rows(path, arity: int) -> list[list[str]]:
    """Comma-separated rows; blank lines and ``|`` comment lines are skipped."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            tokens = [t.strip() for t in line.split(",")]
            if len(tokens) != arity:
                raise DataError(
                    f"{path.name}:{lineno}: expected {arity} fields, got {len(tokens)}")
            rows.append(tokens)
    if not rows:
        raise DataError(f"{path.name}: empty file")
    return rows


def encode_rows(rows, schema: FeatureSchema, source: str = "") -> tuple[np.ndarray, np.ndarray, int]:
    """Map raw string rows to value identifiers. Returns (values, labels, n_unknown)."""
    K = schema.n_keys
    lookup = [{tok: i for i, tok in enumerate(cats)} for cats in schema.categories]
    class_index = {c: i for i, c in enumerate(schema.class_names)}
    values = np.empty((len(rows), K), dtype=np.int64)
    labels = np.empty(len(rows), dtype=np.int64)
    unknown = 0
    for r, tokens in enumerate(rows):
        label = tokens[K].rstrip(".")
        if label not in class_index:
            raise DataError(f"{source}row {r + 1}: unknown class label {tokens[K]!r}")
        labels[r] = class_index[label]
        for k in range(K):
            tok = tokens[k]
            if schema.kinds[k] == NUMERIC:
                edges = schema.bin_edges[schema.keys[k]]
                if tok == MISSING:
                    values[r, k] = len(edges) + 1
                    continue
                try:
                    x = float(tok)
                except ValueError:
                    raise DataError(f"{source}row {r + 1}: non-numeric {schema.keys[k]}={tok!r}")
                values[r, k] = bin_numeric(x, edges)
            else:
                idx = lookup[k].get(tok)
                if idx is None:
                    unknown += 1
                    idx = lookup[k][MISSING]
                values[r, k] = idx
    return values, labels, unknown


def load_uci_csv(path, schema: FeatureSchema, *, split_seed: int = 0,
                 train_fraction: float = 0.8) -> Dataset:
    rows = read_rows(path, schema.n_keys + 1)
    values, labels, unknown = encode_rows(rows, schema, f"{Path(path).name}: ")
    if unknown:
        log.warning("%s: %d unknown categorical tokens mapped to %r", path, unknown, MISSING)
    return Dataset(schema, values, labels, split_seed, train_fraction, n_unknown=unknown)


def fit_numeric_edges(rows, schema: FeatureSchema, n_bins: int = 8) -> FeatureSchema:
    """Schema with quantile edges for every numeric key, fitted on ``rows``."""
    edges = {}
    for k, (key, kind) in enumerate(zip(schema.keys, schema.kinds)):
        if kind == NUMERIC:
            col = [float(r[k]) for r in rows if r[k] != MISSING]
            edges[key] = quantile_edges(col, n_bins)
    return schema.with_edges(edges)


def one_hot(record: KeyValueRecord, schema: FeatureSchema) -> np.ndarray:
    return one_hot_matrix(np.asarray([record.values]), schema)[0]


def one_hot_matrix(values: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    cards = np.asarray(schema.cardinalities)
    offsets = np.concatenate([[0], np.cumsum(cards)[:-1]])
    values = np.asarray(values)
    if np.any(values < 0) or np.any(values >= cards):
        raise DataError("value identifier outside its key's value set")
    out = np.zeros((len(values), int(cards.sum())))
    rows = np.repeat(np.arange(len(values)), schema.n_keys)
    out[rows, (values + offsets).ravel()] = 1.0
    return out


def split(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Train/test index arrays.

    Uses the official boundary when the dataset has one, otherwise a
    stratified shuffle: each class contributes ``round(fraction * n_c)``
    records to the training part.
    """
    if dataset.test_start is not None:
        n = len(dataset)
        return np.arange(dataset.test_start), np.arange(dataset.test_start, n)
    frac = dataset.train_fraction
    if not 0.0 < frac < 1.0:
        raise DataError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(dataset.split_seed)
    train, test = [], []
    for c in range(dataset.schema.n_classes):
        idx = np.flatnonzero(dataset.labels == c)
        if len(idx) == 0:
            continue
        if len(idx) < 2:
            raise DataError(f"class {dataset.schema.class_names[c]!r} has fewer than 2 records")
        idx = rng.permutation(idx)
        n_train = min(max(int(round(frac * len(idx))), 1), len(idx) - 1)
        train.append(idx[:n_train])
        test.append(idx[n_train:])
    train = rng.permutation(np.concatenate(train))
    test = np.sort(np.concatenate(test))
    return train, test


def index_hash(idx: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(idx, dtype="<i8").tobytes()).hexdigest()


def content_hash(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(ds.schema.to_dict(), sort_keys=True).encode())
    h.update(np.asarray(ds.values, dtype="<i8").tobytes())
    h.update(np.asarray(ds.labels, dtype="<i8").tobytes())
    return h.hexdigest()


def dataset_manifest(ds: Dataset, name: str = "") -> dict:
    train, test = split(ds)
    return {
        "name": name,
        "schema": ds.schema.to_dict(),
        "n_records": len(ds),
        "n_unknown_tokens": ds.n_unknown,
        "split": {
            "official": ds.test_start is not None,
            "seed": None if ds.test_start is not None else ds.split_seed,
            "train_fraction": None if ds.test_start is not None else ds.train_fraction,
            "train_hash": index_hash(train),
            "test_hash": index_hash(test),
            "n_train": len(train),
            "n_test": len(test),
        },
        "content_hash": content_hash(ds),
    }
