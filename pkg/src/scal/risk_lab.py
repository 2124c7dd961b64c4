"""Monte-Carlo check of the conflict-region account of decomposition risk.

Two binary subtasks f1 (fires 1) and f2 (fires 2) are combined into a
3-class composite that is undefined where both fire. The excess error of
that composite over a joint 3-class classifier f should equal
Pr(composite wrong | conflict) * Pr(conflict).

Worlds draw X uniformly from [0,1]^2. The subtask regions are intervals on
the first coordinate, so every region probability has a closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ND = -1
CHUNK = 1 << 16


def correlation_coefficient(p: float, p1: float, p2: float) -> float:
    """Correlation of the two firing indicators from their joint and marginal rates."""
    if not (0 < p1 < 1 and 0 < p2 < 1):
        raise ValueError("p1 and p2 must lie strictly between 0 and 1 (zero-variance indicator)")
    lo, hi = max(0.0, p1 + p2 - 1.0), min(p1, p2)
    if not lo - 1e-12 <= p <= hi + 1e-12:
        raise ValueError(f"joint rate p={p} infeasible for p1={p1}, p2={p2}; must be in [{lo}, {hi}]")
    return (p - p1 * p2) / math.sqrt(p1 * (1 - p1) * p2 * (1 - p2))


def feasible_rho(p1: float, p2: float) -> tuple[float, float]:
    lo, hi = max(0.0, p1 + p2 - 1.0), min(p1, p2)
    return correlation_coefficient(lo, p1, p2), correlation_coefficient(hi, p1, p2)


def composite(f1_out: np.ndarray, f2_out: np.ndarray) -> np.ndarray:
    """1 or 2 when exactly one subtask fires, 0 when neither, ND when both."""
    out = np.zeros(len(f1_out), dtype=np.int64)
    one, two = f1_out == 1, f2_out == 2
    out[one & ~two] = 1
    out[two & ~one] = 2
    out[one & two] = ND
    return out


@dataclass
class SubtaskWorld:
    sampler: Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]
    f1: Callable[[np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    n_samples: int = 100_000
    seed: int = 0
    analytic: dict = field(default_factory=dict)


def box_world(p1: float, p2: float, p: float, noise: float = 0.1, n_samples: int = 100_000,
              seed: int = 0) -> SubtaskWorld:
    """World with Pr(f1 fires)=p1, Pr(f2 fires)=p2 and Pr(both)=p.

    f1 fires on x0 in [0, p1), f2 on [p1 - p, p1 - p + p2). Labels follow the
    joint classifier f: inside the conflict region the label is 1 or 2 by the
    second coordinate (noise-free, so f is exact there); elsewhere labels are
    f's output flipped to a random other class with probability ``noise``.
    """
    correlation_coefficient(p, p1, p2)
    a2 = p1 - p
    b2 = a2 + p2

    def fire1(X):
        return np.where(X[:, 0] < p1, 1, 0)

    def fire2(X):
        return np.where((X[:, 0] >= a2) & (X[:, 0] < b2), 2, 0)

    def joint(X):
        in1, in2 = fire1(X) == 1, fire2(X) == 2
        out = np.zeros(len(X), dtype=np.int64)
        out[in1 & ~in2] = 1
        out[in2 & ~in1] = 2
        both = in1 & in2
        out[both] = np.where(X[both, 1] < 0.5, 1, 2)
        return out

    def sampler(rng, n):
        X = rng.random((n, 2))
        y = joint(X)
        conflict = (fire1(X) == 1) & (fire2(X) == 2)
        flip = (rng.random(n) < noise) & ~conflict
        y[flip] = (y[flip] + rng.integers(1, 3, size=int(flip.sum()))) % 3
        return X, y

    analytic = {"p1": p1, "p2": p2, "p": p, "pr_conflict": p, "rho": correlation_coefficient(p, p1, p2)}
    return SubtaskWorld(sampler, fire1, fire2, joint, n_samples, seed, analytic)


def _se(q: float, n: int) -> float:
    return math.sqrt(max(q * (1 - q), 0.0) / n)


@dataclass
class RiskEstimate:
    n: int
    p: float
    p1: float
    p2: float
    rho: float
    pr_conflict: float
    err_composite: float
    err_joint: float
    excess_risk: float
    predicted_excess: float
    se_p: float
    se_p1: float
    se_p2: float
    se_excess: float
    se_gap: float
    target_rho: float | None = None

    def summary(self) -> dict:
        out = {k: v for k, v in self.__dict__.items()}
        if out["target_rho"] is None:
            out.pop("target_rho")
        return out


def _tally(world: SubtaskWorld, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    o1, o2 = world.f1(X), world.f2(X)
    i1, i2 = o1 == 1, o2 == 2
    conflict = i1 & i2
    hat_wrong = composite(o1, o2) != y
    joint_wrong = world.f(X) != y
    diff = hat_wrong.astype(np.int64) - joint_wrong.astype(np.int64)
    gap = diff - (hat_wrong & conflict)
    return np.array([
        len(y), i1.sum(), i2.sum(), conflict.sum(), hat_wrong.sum(), joint_wrong.sum(),
        (hat_wrong & conflict).sum(), diff.sum(), (diff ** 2).sum(), gap.sum(), (gap ** 2).sum(),
    ], dtype=np.int64)


def estimate_risks(world: SubtaskWorld, chunk: int = CHUNK) -> RiskEstimate:
    """Monte-Carlo estimates in independently seeded chunks, merged by summation.

    The composite's undefined outputs count as errors.
    """
    if world.n_samples < 10_000:
        raise ValueError("estimate_risks needs at least 10,000 samples")
    n_chunks = -(-world.n_samples // chunk)
    seeds = np.random.SeedSequence(world.seed).spawn(n_chunks)
    totals = np.zeros(11, dtype=np.int64)
    remaining = world.n_samples
    for s in seeds:
        m = min(chunk, remaining)
        remaining -= m
        X, y = world.sampler(np.random.default_rng(s), m)
        totals += _tally(world, X, y)
    n, s1, s2, s12, hat_err, joint_err, hat_err_c, d_sum, d_sq, g_sum, g_sq = (int(v) for v in totals)
    p1, p2, p = s1 / n, s2 / n, s12 / n
    excess = d_sum / n
    gap_mean = g_sum / n
    if 0 < p1 < 1 and 0 < p2 < 1:
        rho = (p - p1 * p2) / math.sqrt(p1 * (1 - p1) * p2 * (1 - p2))
    else:
        rho = float("nan")
    return RiskEstimate(
        n=n, p=p, p1=p1, p2=p2, rho=rho, pr_conflict=p,
        err_composite=hat_err / n, err_joint=joint_err / n,
        excess_risk=excess, predicted_excess=hat_err_c / n,
        se_p=_se(p, n), se_p1=_se(p1, n), se_p2=_se(p2, n),
        se_excess=math.sqrt(max(d_sq / n - excess ** 2, 0.0) / n),
        se_gap=math.sqrt(max(g_sq / n - gap_mean ** 2, 0.0) / n),
    )


def world_for_rho(rho: float, p1: float = 0.3, p2: float = 0.3, **kwargs) -> SubtaskWorld:
    lo, hi = feasible_rho(p1, p2)
    if not lo - 1e-12 <= rho <= hi + 1e-12:
        raise ValueError(f"rho={rho} unreachable for p1={p1}, p2={p2}; feasible interval is [{lo:.6g}, {hi:.6g}]")
    p = p1 * p2 + rho * math.sqrt(p1 * (1 - p1) * p2 * (1 - p2))
    p = min(max(p, max(0.0, p1 + p2 - 1.0)), min(p1, p2))
    return box_world(p1, p2, p, **kwargs)


def disjoint_world(p1: float = 0.3, p2: float = 0.3, **kwargs) -> SubtaskWorld:
    """Subtask regions that never overlap: an empty conflict region."""
    if p1 + p2 > 1:
        raise ValueError("disjoint regions need p1 + p2 <= 1")
    return box_world(p1, p2, 0.0, **kwargs)


def sweep_correlation(levels: Sequence[float], p1: float = 0.3, p2: float = 0.3, noise: float = 0.1,
                      n_samples: int = 100_000, seed: int = 0) -> list[RiskEstimate]:
    out = []
    for i, rho in enumerate(levels):
        world = world_for_rho(rho, p1, p2, noise=noise, n_samples=n_samples, seed=seed + i)
        est = estimate_risks(world)
        est.target_rho = float(rho)
        out.append(est)
    return out


def learned_world(world: SubtaskWorld, n_train: int = 20_000, params=None, seed: int = 0) -> SubtaskWorld:
    """Replace the exact classifiers with CART trees fit on sampled data.

    Each subtask only sees its own subproblem (labels {0,1} or {0,2}), as a
    divide-and-conquer learner would; the joint tree sees all three classes.
    """
    from .cart import TreeParams, fit_tree

    params = params or TreeParams(max_depth=8, min_leaf=5)
    X, y = world.sampler(np.random.default_rng([seed, 1]), n_train)
    m1 = y != 2
    m2 = y != 1
    t1 = fit_tree(X[m1], np.where(y[m1] == 1, 1, 0), params, n_classes=2)
    t2 = fit_tree(X[m2], np.where(y[m2] == 2, 2, 0), params, n_classes=3)
    tf = fit_tree(X, y, params, n_classes=3)
    return SubtaskWorld(world.sampler, t1.predict, t2.predict, tf.predict, world.n_samples, world.seed,
                        dict(world.analytic))
