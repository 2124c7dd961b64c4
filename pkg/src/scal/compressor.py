"""Per-class zstd dictionaries and compression fingerprints.

A payload's fingerprint is its compressed size under every class model;
a payload compresses best under the dictionary trained on its own class.
"""
from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import zstandard

from .dataset import Dataset

log = logging.getLogger(__name__)

DEFAULT_LEVEL = 2
DEFAULT_DICT_SIZE = 16 * 1024
DEFAULT_MAX_SAMPLES = 10_000
MIN_DICT_SAMPLES = 8


class CompressionWarning(UserWarning):
    pass


@dataclass
class ClassCompressionModel:
    class_index: int
    dictionary: bytes
    level: int = DEFAULT_LEVEL

    def __post_init__(self):
        params = dict(level=self.level, write_checksum=False, write_dict_id=False)
        if self.dictionary:
            zdict = zstandard.ZstdCompressionDict(self.dictionary)
            zdict.precompute_compress(level=self.level)
            params["dict_data"] = zdict
        self._compressor = zstandard.ZstdCompressor(**params)

    def code_length(self, payload: bytes) -> int:
        return len(self._compressor.compress(payload))


def train_class_models(
    train: Dataset,
    dict_size: int = DEFAULT_DICT_SIZE,
    max_dict_samples: int = DEFAULT_MAX_SAMPLES,
    level: int = DEFAULT_LEVEL,
    seed: int = 0,
    threads: int | None = None,
) -> list[ClassCompressionModel]:
    """One dictionary per class, trained only on that class's payloads.

    Classes with fewer than ``MIN_DICT_SAMPLES`` usable payloads, or whose
    corpus zstd refuses to train on, fall back to plain compression.
    """
    rng = np.random.default_rng(seed)
    selections = []
    for c in range(train.n_classes):
        members = np.flatnonzero(train.y == c)
        if len(members) > max_dict_samples:
            members = np.sort(rng.choice(members, size=max_dict_samples, replace=False))
        selections.append(members)

    def one(c: int) -> ClassCompressionModel:
        samples = [p for p in (train.payload(i) for i in selections[c]) if p]
        if len(samples) < MIN_DICT_SAMPLES:
            warnings.warn(
                f"class {train.classes[c]!r}: {len(samples)} payload samples, "
                f"need {MIN_DICT_SAMPLES}; using plain compression",
                CompressionWarning,
                stacklevel=3,
            )
            return ClassCompressionModel(c, b"", level)
        try:
            zdict = zstandard.train_dictionary(dict_size, samples, level=level, dict_id=c + 1, threads=0)
        except zstandard.ZstdError as exc:
            warnings.warn(
                f"class {train.classes[c]!r}: dictionary training failed ({exc}); using plain compression",
                CompressionWarning,
                stacklevel=3,
            )
            return ClassCompressionModel(c, b"", level)
        return ClassCompressionModel(c, zdict.as_bytes(), level)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(train.n_classes)))


def fingerprint(payload: bytes, models: Sequence[ClassCompressionModel]) -> np.ndarray:
    if not models:
        raise ValueError("no compression models")
    return np.array([m.code_length(payload) for m in models], dtype=np.float64)


@dataclass
class FingerprintProfile:
    rows: np.ndarray          # (n_instances, n_classes) code lengths
    class_of_row: np.ndarray


def profile(data: Dataset, models: Sequence[ClassCompressionModel]) -> FingerprintProfile:
    rows = np.array([fingerprint(data.payload(i), models) for i in range(len(data))], dtype=np.float64)
    return FingerprintProfile(rows.reshape(len(data), len(models)), data.y.copy())


def save_models(models: Sequence[ClassCompressionModel], directory: str | Path, classes: Sequence[str],
                max_dict_samples: int = DEFAULT_MAX_SAMPLES, seed: int = 0) -> list[str]:
    """Write one dictionary file per class plus ``compression.json``; returns file names."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for m in models:
        name = f"dict_{m.class_index:03d}.zdict"
        (directory / name).write_bytes(m.dictionary)
        names.append(name)
    manifest = {
        "classes": list(classes),
        "level": models[0].level if models else DEFAULT_LEVEL,
        "max_dict_samples": max_dict_samples,
        "seed": seed,
        "dictionaries": names,
    }
    (directory / "compression.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return names + ["compression.json"]


def load_models(directory: str | Path) -> list[ClassCompressionModel]:
    directory = Path(directory)
    manifest = json.loads((directory / "compression.json").read_text())
    return [
        ClassCompressionModel(i, (directory / name).read_bytes(), manifest["level"])
        for i, name in enumerate(manifest["dictionaries"])
    ]
