"""Black-box L-infinity random-search ("Cube") attack and the two-level
grey-box attack on a SCAL cascade.

Budgets are in min-max normalized feature units fitted on training data.
Integer-valued features (payload bytes and the integer header fields) stay
integers: the feasible box is rounded inward so the budget still holds.
"""
from __future__ import annotations

import io
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .dataset import DURATION_COL, N_FEATURES
from .metrics import macro_f1

SCALER_MAGIC = b"SCALSCL1"

# iteration marks (per 10,000 iterations) at which the subset fraction halves
P_SCHEDULE = (10, 50, 200, 500, 1000, 2000, 4000, 6000, 8000)


@dataclass(frozen=True)
class FeatureScaler:
    lo: np.ndarray
    span: np.ndarray
    integer: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, integer: np.ndarray | None = None) -> "FeatureScaler":
        X = np.asarray(X, dtype=np.float64)
        if integer is None:
            integer = np.ones(X.shape[1], dtype=bool)
            if X.shape[1] == N_FEATURES:
                integer[DURATION_COL] = False
        lo, hi = X.min(axis=0), X.max(axis=0)
        return cls(lo, hi - lo, np.asarray(integer, dtype=bool))

    @classmethod
    def identity(cls, d: int) -> "FeatureScaler":
        return cls(np.zeros(d), np.ones(d), np.zeros(d, dtype=bool))

    def normalize(self, X: np.ndarray) -> np.ndarray:
        span = np.where(self.span > 0, self.span, 1.0)
        return (np.asarray(X, dtype=np.float64) - self.lo) / span

    def box(self, x: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
        """Raw-unit bounds of the eps-ball around ``x`` intersected with the valid box.

        The valid box is the training range, widened to contain ``x`` itself.
        Constant training features get a zero-width box.
        """
        hi_valid = self.lo + self.span
        lo = np.maximum(x - eps * self.span, np.minimum(self.lo, x))
        hi = np.minimum(x + eps * self.span, np.maximum(hi_valid, x))
        lo = np.where(self.integer, np.ceil(lo - 1e-9), lo)
        hi = np.where(self.integer, np.floor(hi + 1e-9), hi)
        return np.minimum(lo, x), np.maximum(hi, x)

    def linf(self, x: np.ndarray, x_adv: np.ndarray) -> float:
        """Perturbation size in normalized units (zero-span features must not move)."""
        diff = np.abs(np.asarray(x_adv) - np.asarray(x))
        if np.any(diff[self.span == 0] > 0):
            return math.inf
        moved = self.span > 0
        return float((diff[moved] / self.span[moved]).max(initial=0.0))

    def to_bytes(self) -> bytes:
        d = len(self.lo)
        return (SCALER_MAGIC + struct.pack("<I", d) + self.lo.astype("<f8").tobytes()
                + self.span.astype("<f8").tobytes() + self.integer.astype(np.uint8).tobytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "FeatureScaler":
        if not data.startswith(SCALER_MAGIC):
            raise ValueError("not a scaler file")
        buf = io.BytesIO(data[len(SCALER_MAGIC):])
        (d,) = struct.unpack("<I", buf.read(4))
        lo = np.frombuffer(buf.read(8 * d), dtype="<f8").copy()
        span = np.frombuffer(buf.read(8 * d), dtype="<f8").copy()
        integer = np.frombuffer(buf.read(d), dtype=np.uint8).astype(bool)
        return cls(lo, span, integer)


@dataclass(frozen=True)
class AttackBudget:
    epsilon: float
    n_iters: int = 1000
    p_init: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0 < self.p_init <= 1:
            raise ValueError("p_init must be in (0, 1]")


@dataclass
class AttackResult:
    adversarial_example: np.ndarray
    success: bool
    queries_used: int
    phase: str = "blackbox"


def subset_fraction(p_init: float, it: int, n_iters: int) -> float:
    marks = int(it / max(n_iters, 1) * 10_000)
    return p_init / 2 ** sum(marks > m for m in P_SCHEDULE)


# score(x) -> (success, loss); lower loss is better for the attacker
Objective = Callable[[np.ndarray], tuple[bool, float]]


def _random_search(objective: Objective, x: np.ndarray, lo: np.ndarray, hi: np.ndarray, n_iters: int,
                   p_init: float, rng: np.random.Generator, start: np.ndarray | None = None):
    """Returns (best candidate, success, queries, best loss)."""
    queries = 0
    current = x.copy() if start is None else start.copy()
    if start is not None:
        queries += 1
        ok, best_loss = objective(current)
        if ok:
            return current, True, queries, best_loss
    else:
        _, best_loss = objective(current)
    mutable = np.flatnonzero(hi > lo)
    if len(mutable) == 0:
        return current, False, queries, best_loss
    for it in range(n_iters):
        m = max(1, math.ceil(subset_fraction(p_init, it, n_iters) * len(mutable)))
        chosen = rng.choice(mutable, size=min(m, len(mutable)), replace=False)
        up = rng.random(len(chosen)) < 0.5
        cand = current.copy()
        cand[chosen] = np.where(up, hi[chosen], lo[chosen])
        queries += 1
        ok, loss = objective(cand)
        if ok:
            return cand, True, queries, loss
        if loss < best_loss:
            current, best_loss = cand, loss
    return current, False, queries, best_loss


def _label_objective(model, y_true: int) -> Objective:
    def objective(z: np.ndarray) -> tuple[bool, float]:
        proba = model.predict_proba(z[None, :])[0]
        return int(np.argmax(proba)) != y_true, float(proba[y_true])
    return objective


def _predict_one(model, x: np.ndarray) -> int:
    return int(np.argmax(model.predict_proba(x[None, :])[0]))


def cube_attack(model, x: np.ndarray, y_true: int, budget: AttackBudget, scaler: FeatureScaler | None = None,
                start: np.ndarray | None = None, rng: np.random.Generator | None = None) -> AttackResult:
    """Random search over eps-box vertices on random feature subsets.

    Only ``model.predict_proba`` is used. An input the model already gets
    wrong counts as a success with zero queries; the clean check is free.
    ``start`` warm-starts from an earlier candidate inside the same box.
    """
    x = np.asarray(x, dtype=np.float64)
    scaler = scaler or FeatureScaler.identity(len(x))
    rng = rng if rng is not None else np.random.default_rng(budget.seed)
    if _predict_one(model, x) != y_true:
        return AttackResult(x.copy(), True, 0, "clean")
    if budget.epsilon == 0:
        return AttackResult(x.copy(), False, 0)
    lo, hi = scaler.box(x, budget.epsilon)
    cand, ok, queries, _ = _random_search(_label_objective(model, y_true), x, lo, hi, budget.n_iters,
                                          budget.p_init, rng, start)
    return AttackResult(cand if ok else x.copy(), ok, queries)


def greybox_scal_attack(model, x: np.ndarray, y_true: int, budget: AttackBudget,
                        scaler: FeatureScaler | None = None, rng: np.random.Generator | None = None) -> AttackResult:
    """Attack the distributor first, then the routed local classifier.

    Phase 1 spends half the iterations pushing the instance out of its true
    subproblem; if the end-to-end label has not flipped, phase 2 spends the
    rest attacking the whole cascade from the phase-1 point. A single-class
    route has no local tree, so phase 2 is skipped there.
    """
    if model.distributor is None:
        return cube_attack(model, x, y_true, budget, scaler, rng=rng)
    x = np.asarray(x, dtype=np.float64)
    scaler = scaler or FeatureScaler.identity(len(x))
    rng = rng if rng is not None else np.random.default_rng(budget.seed)
    if _predict_one(model, x) != y_true:
        return AttackResult(x.copy(), True, 0, "clean")
    if budget.epsilon == 0:
        return AttackResult(x.copy(), False, 0, "distributor")
    lo, hi = scaler.box(x, budget.epsilon)
    true_route = int(model.partition.group_of()[y_true])
    distributor = model.distributor

    def misroute(z: np.ndarray) -> tuple[bool, float]:
        proba = distributor.predict_proba(z[None, :])[0]
        return int(np.argmax(proba)) != true_route, float(proba[true_route])

    n1 = budget.n_iters // 2
    x1, _, queries, _ = _random_search(misroute, x, lo, hi, n1, budget.p_init, rng)
    queries += 1
    if _predict_one(model, x1) != y_true:
        return AttackResult(x1, True, queries, "distributor")
    if int(model.route(x1)[0]) not in model.locals:
        return AttackResult(x.copy(), False, queries, "distributor")
    start = x1 if not np.array_equal(x1, x) else None
    cand, ok, q2, _ = _random_search(_label_objective(model, y_true), x, lo, hi, budget.n_iters - n1,
                                     budget.p_init, rng, start)
    return AttackResult(cand if ok else x.copy(), ok, queries + q2, "local")


def _is_cascade(model) -> bool:
    return hasattr(model, "distributor") and hasattr(model, "partition")


def attack_one(model, x, y_true, budget: AttackBudget, scaler=None, mode: str = "auto", index: int = 0,
               start=None) -> AttackResult:
    """Per-instance entry point with an instance-specific, seed-derived RNG."""
    rng = np.random.default_rng([budget.seed, index])
    grey = mode == "greybox" or (mode == "auto" and _is_cascade(model))
    if grey and start is None:
        if not _is_cascade(model):
            raise ValueError("grey-box mode needs a SCAL model")
        return greybox_scal_attack(model, x, y_true, budget, scaler, rng=rng)
    return cube_attack(model, x, y_true, budget, scaler, start=start, rng=rng)


@dataclass
class AttackReport:
    epsilon: float
    clean_acc: float
    adv_acc: float
    clean_f1: float
    adv_f1: float
    success_rate: float
    results: list[AttackResult]
    X_adv: np.ndarray

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "clean_acc": self.clean_acc,
            "adv_acc": self.adv_acc,
            "clean_f1": self.clean_f1,
            "adv_f1": self.adv_f1,
            "success_rate": self.success_rate,
        }


def _report(model, test, budget, results: list[AttackResult], clean_pred: np.ndarray) -> AttackReport:
    X_adv = np.array([r.adversarial_example for r in results]).reshape(test.X.shape)
    adv_pred = model.predict(X_adv)
    n = test.n_classes
    correct = clean_pred == test.y
    flipped = np.array([r.success for r in results]) & correct
    return AttackReport(
        epsilon=budget.epsilon,
        clean_acc=float(np.mean(correct)),
        adv_acc=float(np.mean(adv_pred == test.y)),
        clean_f1=macro_f1(test.y, clean_pred, n),
        adv_f1=macro_f1(test.y, adv_pred, n),
        success_rate=float(flipped.sum() / max(correct.sum(), 1)),
        results=results,
        X_adv=X_adv,
    )


def evaluate_under_attack(model, test, budget: AttackBudget, scaler: FeatureScaler | None = None,
                          mode: str = "auto", threads: int | None = None,
                          warm: Sequence[AttackResult | None] | None = None) -> AttackReport:
    """Attack every test instance and recompute metrics on the perturbed inputs.

    Failed attacks keep the original input. ``warm`` supplies earlier results
    (from a smaller budget); their successes are reused as they stand.
    """
    clean_pred = model.predict(test.X)

    def one(i: int) -> AttackResult:
        prev = warm[i] if warm is not None else None
        if prev is not None and prev.success:
            return prev
        return attack_one(model, test.X[i], int(test.y[i]), budget, scaler, mode, index=i)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(one, range(len(test))))
    return _report(model, test, budget, results, clean_pred)


def attack_sweep(model, test, epsilons: Sequence[float], budget: AttackBudget, scaler=None, mode: str = "auto",
                 threads: int | None = None) -> list[AttackReport]:
    """Reports for increasing budgets, each warm-started from the previous one."""
    reports: list[AttackReport] = []
    warm = None
    for eps in sorted(epsilons):
        rep = evaluate_under_attack(model, test, replace(budget, epsilon=eps), scaler, mode, threads, warm)
        reports.append(rep)
        warm = rep.results
    return reports
