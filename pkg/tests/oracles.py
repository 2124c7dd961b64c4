"""Independent reference implementations used by the tests."""
from fractions import Fraction


def brute_force_split(X, y, min_leaf=1):
    """Enumerate every (feature, midpoint) with exact rational Gini scores.

    Returns (feature, threshold) of the best split, lowest feature then
    lowest threshold on ties, or None.
    """
    n, d = X.shape
    labels = sorted(set(y.tolist()))
    best = None
    for f in range(d):
        vals = sorted(set(X[:, f].tolist()))
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2
            left = y[X[:, f] <= thr]
            right = y[X[:, f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            score = sum(Fraction(int((left == c).sum()) ** 2, len(left)) for c in labels) + \
                sum(Fraction(int((right == c).sum()) ** 2, len(right)) for c in labels)
            if best is None or score > best[0]:
                best = (score, f, thr)
    return None if best is None else (best[1], best[2])
