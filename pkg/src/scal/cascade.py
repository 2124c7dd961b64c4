"""Correlation-aware cascade: per-class compressors, class grouping, an
instance distributor over groups and one local tree per multi-class group.

Also holds the model-directory format shared by every model kind the CLI
trains (``scal``, ``pseudo``, ``global-tree``, ``forest``).
"""
from __future__ import annotations

import json
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cart
from .cart import ForestModel, TreeModel, TreeParams
from .compressor import (
    DEFAULT_DICT_SIZE,
    DEFAULT_MAX_SAMPLES,
    ClassCompressionModel,
    load_models,
    profile,
    save_models,
    train_class_models,
)
from .dataset import Dataset
from .decomposition import SubproblemPartition, cluster, correlation_matrix, select_k

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
FORMAT = "scal-model/1"


class RoutingWarning(UserWarning):
    pass


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=1, sort_keys=True) + "\n").encode("utf-8")


@dataclass
class ScalModel:
    classes: list[str]
    partition: SubproblemPartition
    distributor: TreeModel | None
    locals: dict[int, TreeModel]
    n_features: int
    params: TreeParams = TreeParams()
    seed: int = 0
    mode: str = "scal"
    compression_models: list[ClassCompressionModel] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    train_seconds: float = 0.0

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def components(self) -> dict[str, TreeModel]:
        out = {}
        if self.distributor is not None:
            out["distributor.tree"] = self.distributor
        for gid in sorted(self.locals):
            out[f"local_{gid:03d}.tree"] = self.locals[gid]
        return out

    @property
    def n_nodes(self) -> int:
        return sum(t.n_nodes for t in self.components().values())

    def manifest(self) -> dict:
        return {
            "format": FORMAT,
            "mode": self.mode,
            "classes": list(self.classes),
            "partition": self.partition.to_dict(self.classes),
            "n_features": self.n_features,
            "params": asdict(self.params),
            "seed": self.seed,
            "distributor": "distributor.tree" if self.distributor is not None else None,
            "locals": {str(g): f"local_{g:03d}.tree" for g in sorted(self.locals)},
            "compression": "compression.json" if self.compression_models else None,
            "probabilities": "leaf class frequencies (uncalibrated)",
            "config": self.config,
        }

    @property
    def serialized_bytes(self) -> int:
        """Inference-time size: manifest plus distributor and local trees.

        Compression dictionaries are only needed while training and are
        reported separately by :attr:`dictionary_bytes`.
        """
        return len(_json_bytes(self.manifest())) + sum(len(cart.dump_tree(t)) for t in self.components().values())

    @property
    def dictionary_bytes(self) -> int:
        return sum(len(m.dictionary) for m in self.compression_models)

    def route(self, X: np.ndarray) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        if self.distributor is None:
            return np.zeros(len(X), dtype=np.int64)
        return self.distributor.predict(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.infer_batch(X)[1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.infer_batch(X)[0]

    def infer_batch(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Predicted class, probability vector and route for every row."""
        X = _as_matrix(X, self.n_features)
        routes = self.route(X)
        proba = np.zeros((len(X), self.n_classes))
        for gid, group in enumerate(self.partition.groups):
            rows = np.flatnonzero(routes == gid)
            if len(rows) == 0:
                continue
            if gid in self.locals:
                proba[rows] = self.locals[gid].predict_proba(X[rows])
            else:
                proba[rows, group[0]] = 1.0
        return np.argmax(proba, axis=1), proba, routes


def _as_matrix(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def infer(model: ScalModel, x: np.ndarray) -> tuple[int, np.ndarray, int]:
    pred, proba, route = model.infer_batch(x)
    return int(pred[0]), proba[0], int(route[0])


def fit_cascade(train: Dataset, partition: SubproblemPartition, params: TreeParams | None = None,
                seed: int = 0, threads: int | None = None, mode: str = "scal") -> ScalModel:
    """Distributor plus local trees for a fixed partition.

    Local training sets are whatever the fitted distributor routes to each
    group, so local trees see the distributor's own mistakes.
    """
    started = time.perf_counter()
    params = params or TreeParams()
    n = train.n_classes
    if partition.n_classes != n:
        raise ValueError("partition does not cover the dataset's classes")
    X, y = train.X, train.y
    if partition.k == 1:
        local = cart.fit_tree(X, y, params, seed=seed, n_classes=n)
        return ScalModel(list(train.classes), partition, None, {0: local}, X.shape[1], params, seed, mode,
                         train_seconds=time.perf_counter() - started)

    group_of = partition.group_of()
    distributor = cart.fit_tree(X, group_of[y], params, seed=seed, n_classes=partition.k)
    routed = distributor.predict(X)
    prior = train.class_counts()

    def fit_local(gid: int) -> TreeModel:
        rows = np.flatnonzero(routed == gid)
        group = partition.groups[gid]
        if len(rows) == 0:
            majority = max(group, key=lambda c: (prior[c], -c))
            warnings.warn(f"subproblem {gid} received no training instances; "
                          f"predicting {train.classes[majority]!r}", RoutingWarning, stacklevel=3)
            return cart.constant_tree(majority, n, X.shape[1], int(prior[majority]))
        return cart.fit_tree(X[rows], y[rows], params, seed=seed, n_classes=n)

    multi = [gid for gid, g in enumerate(partition.groups) if len(g) > 1]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        locals_ = dict(zip(multi, pool.map(fit_local, multi)))
    return ScalModel(list(train.classes), partition, distributor, locals_, X.shape[1], params, seed, mode,
                     train_seconds=time.perf_counter() - started)


@dataclass(frozen=True)
class CompressionParams:
    dict_size: int = DEFAULT_DICT_SIZE
    max_dict_samples: int = DEFAULT_MAX_SAMPLES
    level: int = 2


def train(data: Dataset, k: int | str = "auto", params: TreeParams | None = None, seed: int = 0,
          k_max: int | None = None, compression: CompressionParams = CompressionParams(),
          threads: int | None = None) -> ScalModel:
    """Full pipeline: compressors, fingerprints, correlation, grouping, cascade."""
    if data.n_classes < 2:
        raise ValueError("SCAL needs at least 2 classes")
    started = time.perf_counter()
    models = train_class_models(data, compression.dict_size, compression.max_dict_samples,
                                compression.level, seed=seed, threads=threads)
    prof = profile(data, models)
    corr = correlation_matrix(prof)
    if k == "auto":
        partition = select_k(data, prof, corr, k_max, seed=seed, params=params, threads=threads)
    else:
        partition = cluster(corr, int(k))
    model = fit_cascade(data, partition, params, seed=seed, threads=threads)
    model.compression_models = models
    model.train_seconds = time.perf_counter() - started
    return model


def random_partition(n_classes: int, k: int, seed: int = 0) -> SubproblemPartition:
    """Uniformly random partition of the classes into k non-empty groups."""
    if not 2 <= k <= n_classes:
        raise ValueError(f"k must be in [2, {n_classes}]")
    rng = np.random.default_rng(seed)
    while True:
        assign = rng.integers(0, k, size=n_classes)
        if len(np.unique(assign)) == k:
            break
    return SubproblemPartition(tuple(tuple(np.flatnonzero(assign == g).tolist()) for g in range(k)))


def train_pseudo(data: Dataset, k: int, params: TreeParams | None = None, seed: int = 0,
                 threads: int | None = None) -> ScalModel:
    """Same cascade on a random class partition (no fingerprints)."""
    partition = random_partition(data.n_classes, k, seed)
    return fit_cascade(data, partition, params, seed=seed, threads=threads, mode="pseudo")


# --------------------------------------------------------------------------
# single-model baselines


@dataclass
class BaselineModel:
    """A global tree or forest together with its class names."""

    mode: str
    classes: list[str]
    estimator: TreeModel | ForestModel
    params: TreeParams = TreeParams()
    seed: int = 0
    config: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_features(self) -> int:
        return self.estimator.n_features

    @property
    def n_nodes(self) -> int:
        return self.estimator.n_nodes

    @property
    def train_seconds(self) -> float:
        return self.estimator.train_seconds

    @property
    def blob_name(self) -> str:
        return "tree.tree" if self.mode == "global-tree" else "forest.frst"

    def blob(self) -> bytes:
        if isinstance(self.estimator, ForestModel):
            return cart.dump_forest(self.estimator)
        return cart.dump_tree(self.estimator)

    def manifest(self) -> dict:
        out = {
            "format": FORMAT,
            "mode": self.mode,
            "classes": list(self.classes),
            "n_features": self.n_features,
            "params": asdict(self.params),
            "seed": self.seed,
            "model": self.blob_name,
            "probabilities": "leaf class frequencies (uncalibrated)",
            "config": self.config,
        }
        if isinstance(self.estimator, ForestModel):
            out["n_estimators"] = self.estimator.n_estimators
        return out

    @property
    def serialized_bytes(self) -> int:
        return len(_json_bytes(self.manifest())) + len(self.blob())

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.estimator.predict_proba(X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.estimator.predict(X)


def train_global_tree(data: Dataset, params: TreeParams | None = None, seed: int = 0) -> BaselineModel:
    params = params or TreeParams()
    tree = cart.fit_tree(data.X, data.y, params, seed=seed, n_classes=data.n_classes)
    return BaselineModel("global-tree", list(data.classes), tree, params, seed)


def train_forest(data: Dataset, n_estimators: int = 100, params: TreeParams | None = None, seed: int = 0,
                 threads: int | None = None) -> BaselineModel:
    params = params or TreeParams(max_features="sqrt")
    forest = cart.fit_forest(data.X, data.y, n_estimators, params, seed=seed, n_classes=data.n_classes,
                             threads=threads)
    return BaselineModel("forest", list(data.classes), forest, params, seed)


def prune_model(model: ScalModel | BaselineModel, holdout: Dataset, max_acc_loss: float = 0.0):
    """Cost-complexity prune every tree of ``model`` against ``holdout``.

    Cascade components are pruned on what they see at inference: the
    distributor on group ids, each local tree on the holdout rows routed
    to it. Components that receive no holdout rows are left as they are.
    """
    if len(holdout) == 0:
        raise ValueError("pruning needs a non-empty holdout set")
    X = holdout.X
    if isinstance(model, BaselineModel):
        est = model.estimator
        if isinstance(est, ForestModel):
            trees = [cart.prune(t, X, holdout.y, max_acc_loss) for t in est.trees]
            est = ForestModel(trees, est.bootstrap_seed, est.n_classes, est.n_features, est.train_seconds)
        else:
            est = cart.prune(est, X, holdout.y, max_acc_loss)
        return replace(model, estimator=est)
    distributor = model.distributor
    routes = np.zeros(len(X), dtype=np.int64)
    if distributor is not None:
        distributor = cart.prune(distributor, X, model.partition.group_of()[holdout.y], max_acc_loss)
        routes = distributor.predict(X)
    locals_ = {}
    for gid, tree in model.locals.items():
        rows = np.flatnonzero(routes == gid)
        locals_[gid] = cart.prune(tree, X[rows], holdout.y[rows], max_acc_loss) if len(rows) else tree
    return replace(model, distributor=distributor, locals=locals_)


# --------------------------------------------------------------------------
# model directories


def save_model(model: ScalModel | BaselineModel, directory: str | Path) -> list[str]:
    """Write ``model`` to ``directory``; returns the file names written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if isinstance(model, ScalModel):
        for name, tree in model.components().items():
            (directory / name).write_bytes(cart.dump_tree(tree))
            written.append(name)
        if model.compression_models:
            written += save_models(model.compression_models, directory, model.classes,
                                   seed=model.seed)
    else:
        (directory / model.blob_name).write_bytes(model.blob())
        written.append(model.blob_name)
    (directory / MANIFEST).write_bytes(_json_bytes(model.manifest()))
    written.append(MANIFEST)
    return written


def _params(d: dict) -> TreeParams:
    return TreeParams(**d)


def load_model(directory: str | Path) -> ScalModel | BaselineModel:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST).read_text())
    except FileNotFoundError:
        raise FileNotFoundError(f"{directory}: no {MANIFEST}; not a model directory") from None
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{directory}: unsupported model format {manifest.get('format')!r}")
    classes = manifest["classes"]
    params = _params(manifest["params"])
    mode = manifest["mode"]
    if mode in ("scal", "pseudo"):
        partition = SubproblemPartition.from_dict(manifest["partition"], classes)
        distributor = None
        if manifest["distributor"]:
            distributor = cart.load_tree((directory / manifest["distributor"]).read_bytes())
        locals_ = {int(g): cart.load_tree((directory / name).read_bytes())
                   for g, name in manifest["locals"].items()}
        comp = load_models(directory) if manifest.get("compression") else []
        return ScalModel(classes, partition, distributor, locals_, manifest["n_features"], params,
                         manifest["seed"], mode, comp, manifest.get("config", {}))
    blob = (directory / manifest["model"]).read_bytes()
    estimator = cart.load_forest(blob) if mode == "forest" else cart.load_tree(blob)
    return BaselineModel(mode, classes, estimator, params, manifest["seed"], manifest.get("config", {}))


def model_files(directory: str | Path) -> Sequence[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.is_file())
