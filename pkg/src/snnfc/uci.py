"""Schemas, file locations and loaders for the four UCI datasets."""

from __future__ import annotations

import hashlib
import logging
import os
import urllib.request
from pathlib import Path

import numpy as np

from .dataset import (CATEGORICAL, NUMERIC, DataError, Dataset, FeatureSchema,
                      encode_rows, fit_numeric_edges, read_rows)

log = logging.getLogger(__name__)

DATA_ENV = "SNNFC_DATA"
UCI_BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

_C = CATEGORICAL
_N = NUMERIC

CAR = FeatureSchema(
    keys=("buying", "maint", "doors", "persons", "lug_boot", "safety"),
    kinds=(_C,) * 6,
    categories=(
        ("vhigh", "high", "med", "low"),
        ("vhigh", "high", "med", "low"),
        ("2", "3", "4", "5more"),
        ("2", "4", "more"),
        ("small", "med", "big"),
        ("low", "med", "high"),
    ),
    class_names=("unacc", "acc", "good", "vgood"),
)

NURSERY = FeatureSchema(
    keys=("parents", "has_nurs", "form", "children", "housing", "finance", "social", "health"),
    kinds=(_C,) * 8,
    categories=(
        ("usual", "pretentious", "great_pret"),
        ("proper", "less_proper", "improper", "critical", "very_crit"),
        ("complete", "completed", "incomplete", "foster"),
        ("1", "2", "3", "more"),
        ("convenient", "less_conv", "critical"),
        ("convenient", "inconv"),
        ("nonprob", "slightly_prob", "problematic"),
        ("recommended", "priority", "not_recom"),
    ),
    class_names=("not_recom", "recommend", "very_recom", "priority", "spec_prior"),
)

CONNECT4 = FeatureSchema(
    keys=tuple(f"{col}{row}" for col in "abcdefg" for row in range(1, 7)),
    kinds=(_C,) * 42,
    categories=(("x", "o", "b"),) * 42,
    class_names=("win", "loss", "draw"),
)

ADULT = FeatureSchema(
    keys=("age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
          "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
          "hours-per-week", "native-country"),
    kinds=(_N, _C, _N, _C, _N, _C, _C, _C, _C, _C, _N, _N, _N, _C),
    categories=(
        (),
        ("Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
         "State-gov", "Without-pay", "Never-worked"),
        (),
        ("Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
         "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th", "Doctorate",
         "5th-6th", "Preschool"),
        (),
        ("Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
         "Married-spouse-absent", "Married-AF-spouse"),
        ("Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
         "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
         "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
         "Armed-Forces"),
        ("Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"),
        ("White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"),
        ("Female", "Male"),
        (), (), (),
        ("United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
         "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China", "Cuba",
         "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica", "Vietnam", "Mexico",
         "Portugal", "Ireland", "France", "Dominican-Republic", "Laos", "Ecuador", "Taiwan",
         "Haiti", "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland", "Thailand",
         "Yugoslavia", "El-Salvador", "Trinadad&Tobago", "Peru", "Hong",
         "Holand-Netherlands"),
    ),
    class_names=("<=50K", ">50K"),
)

SCHEMAS = {"adult": ADULT, "nursery": NURSERY, "car": CAR, "connect4": CONNECT4}

# (file name, remote path, sha256 or None when not yet pinned)
FILES = {
    "car": [("car.data", "car/car.data",
             "b703a9ac69f11e64ce8c223c0a40de4d2e9d769f7fb20be5f8f2e8a619893d83")],
    "nursery": [("nursery.data", "nursery/nursery.data", None)],
    "connect4": [("connect-4.data", "connect-4/connect-4.data.Z", None)],
    "adult": [
        ("adult.data", "adult/adult.data",
         "5b00264637dbfec36bdeaab5676b0b309ff9eb788d63554ca0a249491c86603d"),
        ("adult.test", "adult/adult.test",
         "a2a9044bc167a35b2361efbabec64e89d69ce82d9790d2980119aac5fd7e9c05"),
    ],
}

NUMERIC_BINS = 8


def data_dir(path=None) -> Path:
    if path is not None:
        return Path(path)
    return Path(os.environ.get(DATA_ENV, "data"))


def check_name(name: str) -> str:
    if name not in SCHEMAS:
        raise DataError(f"unknown dataset {name!r}; choose from {{adult, nursery, car, connect4}}")
    return name


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def verify(name: str, root=None) -> dict[str, str]:
    """Check that the raw files exist and match their pinned checksums."""
    root = data_dir(root)
    digests = {}
    for fname, _, pinned in FILES[check_name(name)]:
        path = root / fname
        if not path.exists():
            raise DataError(f"missing file: {path} (run `snnfc fetch {name}` or place it there)")
        digest = sha256(path)
        if pinned is not None and digest != pinned:
            raise DataError(f"checksum mismatch for {path}: {digest}")
        if pinned is None:
            log.warning("%s has no pinned checksum; recorded %s", fname, digest)
        digests[fname] = digest
    return digests


def available(name: str, root=None) -> bool:
    try:
        verify(name, root)
    except DataError:
        return False
    return True


def fetch(name: str, root=None) -> None:
    """Download the raw files from the UCI archive into the data directory."""
    root = data_dir(root)
    root.mkdir(parents=True, exist_ok=True)
    for fname, remote, _ in FILES[check_name(name)]:
        dest = root / fname
        if dest.exists():
            continue
        url = f"{UCI_BASE}/{remote}"
        log.info("downloading %s", url)
        with urllib.request.urlopen(url, timeout=60) as resp:
            payload = resp.read()
        if remote.endswith(".Z"):
            raise DataError(f"{url} is unix-compressed; decompress it to {dest} by hand")
        dest.write_bytes(payload)
    verify(name, root)


def load(name: str, root=None, seed: int = 0, train_fraction: float = 0.8,
         n_bins: int = NUMERIC_BINS) -> Dataset:
    """Load a named dataset with its split protocol attached.

    Adult keeps the official train/test files and bins numeric keys with
    quantile edges fitted on the training file only; the others are split
    by stratified shuffle with ``seed``.
    """
    root = data_dir(root)
    verify(name, root)
    schema = SCHEMAS[name]
    if name == "adult":
        arity = schema.n_keys + 1
        train_rows = read_rows(root / "adult.data", arity)
        test_rows = read_rows(root / "adult.test", arity)
        schema = fit_numeric_edges(train_rows, schema, n_bins)
        v1, y1, u1 = encode_rows(train_rows, schema, "adult.data: ")
        v2, y2, u2 = encode_rows(test_rows, schema, "adult.test: ")
        return Dataset(schema, np.concatenate([v1, v2]), np.concatenate([y1, y2]),
                       split_seed=seed, train_fraction=train_fraction,
                       test_start=len(y1), n_unknown=u1 + u2)
    fname = FILES[name][0][0]
    rows = read_rows(root / fname, schema.n_keys + 1)
    values, labels, unknown = encode_rows(rows, schema, f"{fname}: ")
    return Dataset(schema, values, labels, seed, train_fraction, n_unknown=unknown)
