"""Class correlation from fingerprint profiles, average-linkage grouping of
correlated classes, and validation-driven choice of the number of groups."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .compressor import FingerprintProfile
from .dataset import Dataset

log = logging.getLogger(__name__)

TIE_MARGIN = 0.005


@dataclass(frozen=True)
class SubproblemPartition:
    groups: tuple[tuple[int, ...], ...]
    scores: dict[int, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        canon = tuple(sorted(tuple(sorted(g)) for g in self.groups))
        members = [c for g in canon for c in g]
        if any(len(g) == 0 for g in canon):
            raise ValueError("empty subproblem")
        if len(set(members)) != len(members):
            raise ValueError("subproblems overlap")
        if sorted(members) != list(range(len(members))):
            raise ValueError("subproblems must cover classes 0..n-1 exactly once")
        object.__setattr__(self, "groups", canon)

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def n_classes(self) -> int:
        return sum(len(g) for g in self.groups)

    def group_of(self) -> np.ndarray:
        """Subproblem id of every class index."""
        out = np.empty(self.n_classes, dtype=np.int64)
        for gid, g in enumerate(self.groups):
            out[list(g)] = gid
        return out

    def to_dict(self, classes: Sequence[str]) -> dict:
        return {
            "k": self.k,
            "groups": [[classes[c] for c in g] for g in self.groups],
            "validation_macro_f1": {str(k): v for k, v in sorted(self.scores.items())},
        }

    @classmethod
    def from_dict(cls, d: dict, classes: Sequence[str]) -> "SubproblemPartition":
        index = {c: i for i, c in enumerate(classes)}
        scores = {int(k): float(v) for k, v in d.get("validation_macro_f1", {}).items()}
        return cls(tuple(tuple(index[c] for c in g) for g in d["groups"]), scores)

    @classmethod
    def single(cls, n_classes: int) -> "SubproblemPartition":
        return cls((tuple(range(n_classes)),))


def correlation_matrix(prof: FingerprintProfile | np.ndarray) -> np.ndarray:
    """Pearson correlation between fingerprint columns over all rows.

    Pairs involving a constant column get correlation 0 (diagonal stays 1).
    """
    rows = prof.rows if isinstance(prof, FingerprintProfile) else np.asarray(prof, dtype=np.float64)
    if rows.shape[0] < 3:
        raise ValueError("correlation needs at least 3 fingerprint rows")
    centered = rows - rows.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    constant = norms <= 1e-12 * np.maximum(1.0, np.abs(rows).max(axis=0))
    if constant.any():
        warnings.warn(f"constant fingerprint column(s) {np.flatnonzero(constant).tolist()}; correlation set to 0",
                      RuntimeWarning, stacklevel=2)
    safe = np.where(constant, 1.0, norms)
    r = (centered.T @ centered) / np.outer(safe, safe)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def cluster(corr: np.ndarray, k: int) -> SubproblemPartition:
    """Average-linkage agglomeration on distance 1 - r, stopped at ``k`` groups.

    Equal merge distances go to the pair whose smallest members are lowest.
    """
    corr = np.asarray(corr, dtype=np.float64)
    n = corr.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    dist = 1.0 - corr
    groups = [[i] for i in range(n)]
    while len(groups) > k:
        best = None
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                d = float(dist[np.ix_(groups[a], groups[b])].mean())
                key = (min(groups[a]), min(groups[b]))
                if best is None or d < best[0] - 1e-12 or (abs(d - best[0]) <= 1e-12 and key < best[1]):
                    best = (d, key, a, b)
        _, _, a, b = best
        groups[a] = sorted(groups[a] + groups[b])
        del groups[b]
        groups.sort(key=min)
    return SubproblemPartition(tuple(tuple(g) for g in groups))


def select_k(train: Dataset, prof: FingerprintProfile, corr: np.ndarray, k_max: int | None = None,
             seed: int = 0, params=None, threads: int | None = None) -> SubproblemPartition:
    """Pick the number of subproblems by inner-validation macro F1.

    Every k in 1..k_max is trained on a stratified 80% of ``train`` and scored
    on the rest; the smallest k within ``TIE_MARGIN`` of the best score wins,
    so k=1 (one global problem) is kept unless grouping helps.
    """
    from .cascade import fit_cascade
    from .dataset import split
    from .metrics import macro_f1

    n = train.n_classes
    k_max = n if k_max is None else k_max
    if not 1 <= k_max <= n:
        raise ValueError(f"k_max must be in [1, {n}]")
    if k_max == 1:
        return SubproblemPartition(SubproblemPartition.single(n).groups, {1: float("nan")})
    inner, held = split(train, 0.8, seed)
    scores: dict[int, float] = {}
    partitions: dict[int, SubproblemPartition] = {}
    for k in range(1, k_max + 1):
        part = cluster(corr, k)
        model = fit_cascade(inner, part, params=params, seed=seed, threads=threads)
        scores[k] = macro_f1(held.y, model.predict(held.X), n)
        partitions[k] = part
        log.info("select_k: k=%d groups=%s macro_f1=%.4f", k, part.groups, scores[k])
    best = max(scores.values())
    chosen = min(k for k, s in scores.items() if s >= best - TIE_MARGIN)
    return SubproblemPartition(partitions[chosen].groups, scores)
