"""CART decision trees (Gini), bagged forests, cost-complexity pruning and the
compact binary model format.

Trees are stored as flat preorder arrays. Every node keeps its training class
counts so a subtree can be collapsed into a leaf without revisiting the data.
"""
from __future__ import annotations

import io
import math
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TREE_MAGIC = b"SCALTREE1"
FOREST_MAGIC = b"SCALFRST1"

_FEATURE_CHUNK = 256


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_leaf: int = 1
    min_gain: float = 1e-7
    # None: all features; "sqrt": sqrt(d) features drawn per split; int: that many.
    max_features: int | str | None = None


@dataclass
class TreeModel:
    feature: np.ndarray      # int32, -1 at leaves
    threshold: np.ndarray    # float64; x <= threshold goes left
    left: np.ndarray         # int32, -1 at leaves
    right: np.ndarray        # int32, -1 at leaves
    counts: np.ndarray       # (n_nodes, n_labels) training class counts
    labels: np.ndarray       # global class index of each counts column
    n_classes: int
    n_features: int
    train_seconds: float = 0.0
    _walk: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaf_class(self, node: int) -> int:
        return int(self.labels[int(np.argmax(self.counts[node]))])

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf reached by each row."""
        X = self._check(X)
        if len(X) == 1:
            return np.array([self._apply_one(X[0])], dtype=np.int64)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def _apply_one(self, x: np.ndarray) -> int:
        if self._walk is None:
            self._walk = (self.feature.tolist(), self.threshold.tolist(), self.left.tolist(), self.right.tolist())
        feature, threshold, left, right = self._walk
        node = 0
        while feature[node] >= 0:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Leaf class frequencies, embedded in the full class domain."""
        leaves = self.apply(X)
        counts = self.counts[leaves].astype(np.float64)
        proba = np.zeros((len(leaves), self.n_classes))
        proba[:, self.labels] = counts / counts.sum(axis=1, keepdims=True)
        return proba

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.labels[np.argmax(self.counts[self.apply(X)], axis=1)]

    @property
    def serialized_bytes(self) -> int:
        return len(dump_tree(self))


# --------------------------------------------------------------------------
# split search


def gini_purity_score(left_counts: np.ndarray, right_counts: np.ndarray) -> np.ndarray:
    """sum(cL^2)/nL + sum(cR^2)/nR; larger is better.

    The weighted child Gini of a split is 1 - score/n, so maximizing this
    score minimizes impurity and avoids one subtraction per candidate.
    """
    nl = left_counts.sum(axis=-1)
    nr = right_counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (left_counts ** 2).sum(axis=-1) / nl + (right_counts ** 2).sum(axis=-1) / nr


def _feature_scores(values: np.ndarray, onehot: np.ndarray, total: np.ndarray, min_leaf: int):
    """Candidate scores for every (sorted position, feature) of one chunk.

    Returns ``(scores, sorted_values)``; invalid positions score -inf.
    """
    n = len(values)
    order = np.argsort(values, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(values, order, axis=0)
    cum = np.cumsum(onehot[order], axis=0)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    left_sq = (cum ** 2).sum(axis=-1)
    right_sq = ((total - cum) ** 2).sum(axis=-1)
    scores = left_sq / n_left + right_sq / (n - n_left)
    valid = sorted_vals[1:] > sorted_vals[:-1]
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
    scores[~valid] = -np.inf
    return scores, sorted_vals


try:  # optional compiled scan; the numpy path below gives identical scores
    from numba import njit as _njit
except ImportError:  # pragma: no cover
    _njit = None


def _max_scores_numpy(XT: np.ndarray, idx: np.ndarray, yk: np.ndarray, n_labels: int, min_leaf: int,
                      features: np.ndarray) -> np.ndarray:
    onehot = np.eye(n_labels)[yk]
    total = onehot.sum(axis=0)
    out = np.full(len(features), -np.inf)
    for start in range(0, len(features), _FEATURE_CHUNK):
        chunk = features[start:start + _FEATURE_CHUNK]
        values = XT[chunk][:, idx].T
        varying = values.max(axis=0) > values.min(axis=0)
        if not varying.any():
            continue
        scores, _ = _feature_scores(values[:, varying], onehot, total, min_leaf)
        out[start + np.flatnonzero(varying)] = scores.max(axis=0)
    return out


def _max_scores_kernel(XT, idx, yk, n_labels, min_leaf, features):
    n = idx.shape[0]
    total = np.zeros(n_labels)
    for i in range(n):
        total[yk[i]] += 1.0
    total_sq = 0.0
    for c in range(n_labels):
        total_sq += total[c] * total[c]
    out = np.full(features.shape[0], -np.inf)
    buf = np.empty(n)
    cl = np.empty(n_labels)
    for j in range(features.shape[0]):
        row = XT[features[j]]
        lo = np.inf
        hi = -np.inf
        for i in range(n):
            v = row[idx[i]]
            buf[i] = v
            lo = min(lo, v)
            hi = max(hi, v)
        if not hi > lo:
            continue
        order = np.argsort(buf, kind="mergesort")
        cl[:] = 0.0
        left_sq = 0.0
        right_sq = total_sq
        best = -np.inf
        for i in range(n - 1):
            c = yk[order[i]]
            # (a+1)^2 - a^2 and (b-1)^2 - b^2, exact in floating point for counts
            left_sq += 2.0 * cl[c] + 1.0
            right_sq -= 2.0 * (total[c] - cl[c]) - 1.0
            cl[c] += 1.0
            nl = i + 1
            if nl < min_leaf or n - nl < min_leaf:
                continue
            if buf[order[i + 1]] > buf[order[i]]:
                s = left_sq / nl + right_sq / (n - nl)
                if s > best:
                    best = s
        out[j] = best
    return out


_max_scores_compiled = _njit(cache=True, nogil=True)(_max_scores_kernel) if _njit is not None else None


def _max_scores(XT, idx, yk, n_labels, min_leaf, features) -> np.ndarray:
    if _max_scores_compiled is None:
        return _max_scores_numpy(XT, idx, yk, n_labels, min_leaf, features)
    return _max_scores_compiled(XT, idx.astype(np.int64), yk.astype(np.int64), n_labels, min_leaf,
                                features.astype(np.int64))


def _search(XT: np.ndarray, idx: np.ndarray, yk: np.ndarray, n_labels: int, min_leaf: int,
            features: np.ndarray) -> tuple[int, float, float] | None:
    n = len(idx)
    if n < 2 or len(features) == 0:
        return None
    per_feature_max = _max_scores(XT, idx, yk, n_labels, min_leaf, features)
    best = per_feature_max.max()
    if not np.isfinite(best):
        return None
    tol = 1e-12 * n
    f = int(features[int(np.flatnonzero(per_feature_max >= best - tol)[0])])
    onehot = np.eye(n_labels)[yk]
    scores, sorted_vals = _feature_scores(XT[f, idx][:, None], onehot, onehot.sum(axis=0), min_leaf)
    i = int(np.flatnonzero(scores[:, 0] >= best - tol)[0])
    lo, hi = sorted_vals[i, 0], sorted_vals[i + 1, 0]
    threshold = (lo + hi) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return f, float(threshold), float(scores[i, 0])


def best_split(X: np.ndarray, yk: np.ndarray, n_labels: int, min_leaf: int = 1,
               features: np.ndarray | None = None) -> tuple[int, float, float] | None:
    """Exhaustive Gini split search over midpoints of sorted unique values.

    Returns ``(feature, threshold, score)`` with the score as in
    :func:`gini_purity_score`, or None when no valid split exists. Equal
    scores go to the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    yk = np.asarray(yk, dtype=np.int64)
    if features is None:
        features = np.arange(X.shape[1])
    return _search(np.ascontiguousarray(X.T), np.arange(len(yk)), yk, n_labels, min_leaf,
                   np.asarray(features, dtype=np.int64))


def _pick_varying_kernel(XT, idx, perm, m):
    out = np.empty(m, dtype=np.int64)
    have = 0
    for f in perm:
        row = XT[f]
        first = row[idx[0]]
        for i in range(1, idx.shape[0]):
            if row[idx[i]] != first:
                out[have] = f
                have += 1
                break
        if have == m:
            break
    return out[:have]


_pick_varying_compiled = _njit(cache=True, nogil=True)(_pick_varying_kernel) if _njit is not None else None


def _sample_varying(XT: np.ndarray, idx: np.ndarray, candidates: np.ndarray, m: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Uniform draw of up to ``m`` candidates that vary within the node.

    Scanning a random permutation and keeping the first ``m`` varying
    features is a uniform draw without replacement from the varying set.
    """
    perm = rng.permutation(candidates).astype(np.int64)
    if _pick_varying_compiled is not None:
        return np.sort(_pick_varying_compiled(XT, idx.astype(np.int64), perm, m))
    picked: list[np.ndarray] = []
    have = 0
    step = max(4 * m, 32)
    for start in range(0, len(perm), step):
        block = perm[start:start + step]
        vals = XT[block][:, idx]
        block = block[vals.max(axis=1) > vals.min(axis=1)]
        picked.append(block[:m - have])
        have += len(picked[-1])
        if have >= m:
            break
    return np.sort(np.concatenate(picked)) if picked else np.empty(0, dtype=np.int64)


# --------------------------------------------------------------------------
# fitting


def _n_split_features(max_features, d: int) -> int | None:
    if max_features is None:
        return None
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    return max(1, min(int(max_features), d))


def fit_tree(X: np.ndarray, y: np.ndarray, params: TreeParams = TreeParams(), seed: int = 0,
             n_classes: int | None = None) -> TreeModel:
    """Greedy CART with Gini impurity.

    ``y`` holds global class indices; the tree's label domain is the set of
    classes present. The seed only matters when ``params.max_features`` is set.
    """
    started = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("cannot fit a tree on empty data")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    labels = np.unique(y)
    yk = np.searchsorted(labels, y)
    k = len(labels)
    d = X.shape[1]
    mtry = _n_split_features(params.max_features, d)
    rng = np.random.default_rng(seed)
    max_depth = params.max_depth if params.max_depth is not None else np.inf

    XT = np.ascontiguousarray(X.T)
    # features constant over the whole training set can never split
    candidates = np.flatnonzero(XT.max(axis=1) > XT.min(axis=1)) if len(y) else np.empty(0, dtype=np.int64)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []
    stack = [(np.arange(len(y)), 0, -1, True)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        cnt = np.bincount(yk[idx], minlength=k)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(cnt)
        n = len(idx)
        if depth >= max_depth or n < 2 * params.min_leaf or np.count_nonzero(cnt) < 2:
            continue
        feats = candidates if mtry is None else _sample_varying(XT, idx, candidates, mtry, rng)
        split = _search(XT, idx, yk[idx], k, params.min_leaf, feats)
        if split is None:
            continue
        f, thr, score = split
        gain = (score - float((cnt.astype(np.float64) ** 2).sum()) / n) / n
        if gain < params.min_gain:
            continue
        feature[node] = f
        threshold[node] = thr
        go_left = XT[f, idx] <= thr
        stack.append((idx[~go_left], depth + 1, node, False))
        stack.append((idx[go_left], depth + 1, node, True))

    return TreeModel(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        counts=np.array(counts, dtype=np.int64).reshape(len(feature), k),
        labels=labels.astype(np.int64),
        n_classes=int(n_classes),
        n_features=d,
        train_seconds=time.perf_counter() - started,
    )


def constant_tree(label: int, n_classes: int, n_features: int, count: int = 1) -> TreeModel:
    """Single-leaf tree that always predicts ``label``."""
    return TreeModel(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.zeros(1),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        counts=np.array([[max(count, 1)]], dtype=np.int64),
        labels=np.array([label], dtype=np.int64),
        n_classes=n_classes,
        n_features=n_features,
    )


# --------------------------------------------------------------------------
# pruning


def _subtree_stats(tree: TreeModel, is_leaf: np.ndarray):
    """Per node: training errors of its subtree's leaves and its leaf count."""
    n = tree.n_nodes
    own_err = tree.counts.sum(axis=1) - tree.counts.max(axis=1)
    sub_err = np.zeros(n, dtype=np.int64)
    sub_leaves = np.zeros(n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        if is_leaf[i]:
            sub_err[i] = own_err[i]
            sub_leaves[i] = 1
        else:
            sub_err[i] = sub_err[tree.left[i]] + sub_err[tree.right[i]]
            sub_leaves[i] = sub_leaves[tree.left[i]] + sub_leaves[tree.right[i]]
    return own_err, sub_err, sub_leaves


def _reachable(tree: TreeModel, is_leaf: np.ndarray) -> np.ndarray:
    alive = np.zeros(tree.n_nodes, dtype=bool)
    alive[0] = True
    for i in range(tree.n_nodes):
        if alive[i] and not is_leaf[i]:
            alive[tree.left[i]] = alive[tree.right[i]] = True
    return alive


def collapse(tree: TreeModel, is_leaf: np.ndarray) -> TreeModel:
    """Copy of ``tree`` with every node flagged in ``is_leaf`` turned into a leaf."""
    new_id = {}
    feature, threshold, left, right, counts = [], [], [], [], []
    stack = [(0, -1, True)]
    while stack:
        old, parent, is_left = stack.pop()
        node = len(feature)
        new_id[old] = node
        if parent >= 0:
            (left if is_left else right)[parent] = node
        leaf = bool(is_leaf[old]) or tree.feature[old] < 0
        feature.append(-1 if leaf else int(tree.feature[old]))
        threshold.append(0.0 if leaf else float(tree.threshold[old]))
        left.append(-1)
        right.append(-1)
        counts.append(tree.counts[old])
        if not leaf:
            stack.append((int(tree.right[old]), node, False))
            stack.append((int(tree.left[old]), node, True))
    return TreeModel(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        counts=np.array(counts, dtype=np.int64).reshape(len(feature), tree.counts.shape[1]),
        labels=tree.labels.copy(),
        n_classes=tree.n_classes,
        n_features=tree.n_features,
        train_seconds=tree.train_seconds,
    )


def pruning_sequence(tree: TreeModel) -> list[TreeModel]:
    """Weakest-link subtrees from the full tree down to the root leaf."""
    is_leaf = tree.feature < 0
    seq = [tree]
    while not is_leaf[0]:
        own_err, sub_err, sub_leaves = _subtree_stats(tree, is_leaf)
        alive = _reachable(tree, is_leaf)
        internal = np.flatnonzero(alive & ~is_leaf)
        g = (own_err[internal] - sub_err[internal]) / (sub_leaves[internal] - 1)
        weakest = internal[g <= g.min() + 1e-12]
        is_leaf = is_leaf.copy()
        is_leaf[weakest] = True
        seq.append(collapse(tree, is_leaf))
    return seq


def accuracy(model, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(model.predict(X) == y))


def prune(tree: TreeModel, X_holdout: np.ndarray, y_holdout: np.ndarray, max_acc_loss: float = 0.0) -> TreeModel:
    """Smallest weakest-link subtree within ``max_acc_loss`` of the unpruned holdout accuracy."""
    if len(y_holdout) == 0:
        raise ValueError("holdout set is empty")
    if max_acc_loss < 0:
        raise ValueError("max_acc_loss must be non-negative")
    floor = accuracy(tree, X_holdout, y_holdout) - max_acc_loss - 1e-12
    best = tree
    for candidate in pruning_sequence(tree)[1:]:
        if candidate.n_nodes < best.n_nodes and accuracy(candidate, X_holdout, y_holdout) >= floor:
            best = candidate
    return best


# --------------------------------------------------------------------------
# forests


@dataclass
class ForestModel:
    trees: list[TreeModel]
    bootstrap_seed: int
    n_classes: int
    n_features: int
    train_seconds: float = 0.0

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    @property
    def n_nodes(self) -> int:
        return sum(t.n_nodes for t in self.trees)

    def votes(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        votes = np.zeros((len(X), self.n_classes))
        rows = np.arange(len(X))
        for tree in self.trees:
            np.add.at(votes, (rows, tree.predict(X)), 1.0)
        return votes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Vote fractions; their argmax is the plurality vote."""
        return self.votes(X) / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.votes(X), axis=1)

    @property
    def serialized_bytes(self) -> int:
        return len(dump_forest(self))


def fit_forest(X: np.ndarray, y: np.ndarray, n_estimators: int = 100, params: TreeParams | None = None,
               seed: int = 0, n_classes: int | None = None, threads: int | None = None) -> ForestModel:
    """Bagged CART trees with sqrt-feature sampling at each split."""
    started = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("cannot fit a forest on empty data")
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    if params is None:
        params = TreeParams(max_features="sqrt")
    elif params.max_features is None:
        params = TreeParams(params.max_depth, params.min_leaf, params.min_gain, "sqrt")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    children = np.random.SeedSequence(seed).spawn(n_estimators)

    def one(child: np.random.SeedSequence) -> TreeModel:
        rng = np.random.default_rng(child)
        boot = rng.integers(0, len(y), size=len(y))
        tree_seed = int(rng.integers(0, 2**31 - 1))
        return fit_tree(X[boot], y[boot], params, seed=tree_seed, n_classes=n_classes)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        trees = list(pool.map(one, children))
    return ForestModel(trees, seed, int(n_classes), X.shape[1], time.perf_counter() - started)


# --------------------------------------------------------------------------
# binary format: little-endian, preorder nodes; leaves carry class counts,
# internal counts are rebuilt as the sum of their children.

_HEADER = struct.Struct("<IIII")   # n_nodes, n_labels, n_classes, n_features
_SPLIT = struct.Struct("<Id")


def dump_tree(tree: TreeModel) -> bytes:
    out = io.BytesIO()
    out.write(TREE_MAGIC)
    k = len(tree.labels)
    out.write(_HEADER.pack(tree.n_nodes, k, tree.n_classes, tree.n_features))
    out.write(struct.pack(f"<{k}I", *tree.labels.tolist()))
    leaf = struct.Struct(f"<{k}I")
    for i in range(tree.n_nodes):
        if tree.feature[i] >= 0:
            out.write(b"\x00")
            out.write(_SPLIT.pack(int(tree.feature[i]), float(tree.threshold[i])))
        else:
            out.write(b"\x01")
            out.write(leaf.pack(*tree.counts[i].tolist()))
    return out.getvalue()


def _read(buf: io.BytesIO, n: int) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise ValueError("truncated model file")
    return data


def _load_tree_from(buf: io.BytesIO) -> TreeModel:
    if _read(buf, len(TREE_MAGIC)) != TREE_MAGIC:
        raise ValueError("not a SCALTREE1 model")
    n_nodes, k, n_classes, n_features = _HEADER.unpack(_read(buf, _HEADER.size))
    labels = np.array(struct.unpack(f"<{k}I", _read(buf, 4 * k)), dtype=np.int64)
    leaf = struct.Struct(f"<{k}I")
    feature = np.full(n_nodes, -1, dtype=np.int32)
    threshold = np.zeros(n_nodes)
    counts = np.zeros((n_nodes, k), dtype=np.int64)
    for i in range(n_nodes):
        kind = _read(buf, 1)
        if kind == b"\x00":
            feature[i], threshold[i] = _SPLIT.unpack(_read(buf, _SPLIT.size))
        elif kind == b"\x01":
            counts[i] = leaf.unpack(_read(buf, leaf.size))
        else:
            raise ValueError(f"bad node tag {kind!r}")
    left = np.full(n_nodes, -1, dtype=np.int32)
    right = np.full(n_nodes, -1, dtype=np.int32)
    # preorder: an internal node's left child follows it; its right child
    # follows the end of the left subtree
    pending: list[int] = []
    for i in range(1, n_nodes):
        parent = i - 1 if feature[i - 1] >= 0 and left[i - 1] < 0 else None
        if parent is not None:
            left[parent] = i
            pending.append(parent)
        else:
            if not pending:
                raise ValueError("malformed preorder layout")
            right[pending.pop()] = i
    for i in range(n_nodes - 1, -1, -1):
        if feature[i] >= 0:
            counts[i] = counts[left[i]] + counts[right[i]]
    return TreeModel(feature, threshold, left, right, counts, labels, int(n_classes), int(n_features))


def load_tree(data: bytes) -> TreeModel:
    return _load_tree_from(io.BytesIO(data))


def dump_forest(forest: ForestModel) -> bytes:
    out = io.BytesIO()
    out.write(FOREST_MAGIC)
    out.write(struct.pack("<IQII", forest.n_estimators, forest.bootstrap_seed, forest.n_classes, forest.n_features))
    for tree in forest.trees:
        blob = dump_tree(tree)
        out.write(struct.pack("<I", len(blob)))
        out.write(blob)
    return out.getvalue()


def load_forest(data: bytes) -> ForestModel:
    buf = io.BytesIO(data)
    if _read(buf, len(FOREST_MAGIC)) != FOREST_MAGIC:
        raise ValueError("not a SCALFRST1 model")
    n, seed, n_classes, n_features = struct.unpack("<IQII", _read(buf, 20))
    trees = []
    for _ in range(n):
        (size,) = struct.unpack("<I", _read(buf, 4))
        trees.append(load_tree(_read(buf, size)))
    return ForestModel(trees, int(seed), int(n_classes), int(n_features))


def total_nodes(models: Sequence) -> int:
    return sum(m.n_nodes for m in models)
