import numpy as np
import pytest

from scal import cart
from scal.adversarial import (
    AttackBudget,
    FeatureScaler,
    attack_one,
    attack_sweep,
    cube_attack,
    evaluate_under_attack,
    greybox_scal_attack,
    subset_fraction,
)
from scal.cascade import fit_cascade, train
from scal.dataset import block_spec, generate_synthetic, split
from scal.decomposition import SubproblemPartition

D = 10


def stump(feature=7, thr=0.5):
    """Class 0 when x[feature] <= thr, class 1 otherwise."""
    return cart.TreeModel(
        feature=np.array([feature, -1, -1], dtype=np.int32),
        threshold=np.array([thr, 0.0, 0.0]),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        counts=np.array([[5, 5], [5, 0], [0, 5]]),
        labels=np.array([0, 1]), n_classes=2, n_features=D,
    )


def point(v=0.45):
    x = np.full(D, 0.3)
    x[7] = v
    return x


@pytest.mark.parametrize("eps,flips", [(0.0, False), (0.02, False), (0.049, False), (0.051, True), (0.2, True)])
def test_stump_flips_exactly_past_the_gap(eps, flips):
    # the gap from x7 = 0.45 to the threshold is 0.05
    res = cube_attack(stump(), point(), 0, AttackBudget(eps, n_iters=300, seed=1), FeatureScaler.identity(D))
    assert res.success is flips
    if flips:
        assert res.adversarial_example[7] > 0.5
        assert np.abs(res.adversarial_example - point()).max() <= eps + 1e-12


def test_eps_zero_is_a_no_op():
    res = cube_attack(stump(), point(), 0, AttackBudget(0.0))
    assert not res.success and res.queries_used == 0
    assert np.array_equal(res.adversarial_example, point())


def test_constant_model_never_flips():
    res = cube_attack(cart.constant_tree(0, 2, D), point(), 0, AttackBudget(1.0, n_iters=100))
    assert not res.success and res.queries_used == 100


def test_already_wrong_counts_as_clean_success():
    res = cube_attack(stump(), point(0.9), 0, AttackBudget(0.1))
    assert res.success and res.phase == "clean" and res.queries_used == 0


def test_box_rounds_integers_inward_and_stays_valid():
    X = np.array([[0.0, 0.0], [100.0, 1.0]])
    s = FeatureScaler.fit(X, integer=np.array([True, False]))
    lo, hi = s.box(np.array([50.0, 0.5]), 0.013)
    assert lo[0] == 49 and hi[0] == 51  # 50 +/- 1.3 rounded inward
    assert lo[1] == pytest.approx(0.487) and hi[1] == pytest.approx(0.513)
    lo, hi = s.box(np.array([99.0, 0.99]), 0.5)
    assert hi[0] == 100 and hi[1] == 1.0
    # a point outside the training range keeps itself inside its box
    lo, hi = s.box(np.array([120.0, 0.5]), 0.01)
    assert lo[0] <= 120 <= hi[0]


def test_linf_rejects_moving_constant_features():
    s = FeatureScaler(np.zeros(2), np.array([2.0, 0.0]), np.zeros(2, dtype=bool))
    assert s.linf(np.zeros(2), np.array([1.0, 0.0])) == 0.5
    assert s.linf(np.zeros(2), np.array([0.0, 1.0])) == float("inf")


def test_scaler_round_trip():
    rng = np.random.default_rng(0)
    s = FeatureScaler.fit(rng.random((20, 5)) * 10)
    back = FeatureScaler.from_bytes(s.to_bytes())
    assert np.array_equal(back.lo, s.lo) and np.array_equal(back.span, s.span)
    assert np.array_equal(back.integer, s.integer)
    with pytest.raises(ValueError):
        FeatureScaler.from_bytes(b"nope")


def test_budget_validation_and_schedule():
    with pytest.raises(ValueError):
        AttackBudget(-0.1)
    with pytest.raises(ValueError):
        AttackBudget(0.1, p_init=0.0)
    assert subset_fraction(0.1, 0, 1000) == 0.1
    fracs = [subset_fraction(0.1, it, 1000) for it in range(1000)]
    assert fracs == sorted(fracs, reverse=True) and fracs[-1] == 0.1 / 2 ** 9


@pytest.fixture(scope="module")
def corpus():
    data = generate_synthetic(block_spec(n_per_class=80), 3)
    tr, te = split(data, 0.75, 3)
    return tr, te.subset(np.arange(0, len(te), 4)), FeatureScaler.fit(tr.X)


def test_greybox_equals_blackbox_at_k1(corpus):
    tr, te, sc = corpus
    m = fit_cascade(tr, SubproblemPartition.single(4), seed=0)
    b = AttackBudget(0.1, n_iters=60, seed=4)
    for i in range(len(te)):
        g = attack_one(m, te.X[i], int(te.y[i]), b, sc, mode="greybox", index=i)
        c = attack_one(m, te.X[i], int(te.y[i]), b, sc, mode="blackbox", index=i)
        assert g.success == c.success and g.queries_used == c.queries_used
        assert np.array_equal(g.adversarial_example, c.adversarial_example)


def test_greybox_needs_cascade(corpus):
    _, te, sc = corpus
    with pytest.raises(ValueError):
        attack_one(stump(), point(), 0, AttackBudget(0.1), mode="greybox")


def test_greybox_phases_and_singleton_route(corpus):
    tr, te, sc = corpus
    m = fit_cascade(tr, SubproblemPartition(((0,), (1, 2, 3))), seed=0)
    b = AttackBudget(0.3, n_iters=40, seed=0)
    phases = set()
    for i in range(len(te)):
        r = greybox_scal_attack(m, te.X[i], int(te.y[i]), b, sc, rng=np.random.default_rng(i))
        phases.add(r.phase)
        assert r.queries_used <= b.n_iters + 1
        if r.success and r.phase != "clean":
            assert m.predict(r.adversarial_example[None])[0] != te.y[i]
            assert sc.linf(te.X[i], r.adversarial_example) <= 0.3 + 1e-9
    assert phases <= {"clean", "distributor", "local"}


def test_sweep_is_monotone_and_never_improves_f1(corpus):
    tr, te, sc = corpus
    m = train(tr, k=2, seed=0)
    reps = attack_sweep(m, te, [0.4, 0.05, 0.15], AttackBudget(0, n_iters=60, seed=2), sc, mode="blackbox")
    assert [r.epsilon for r in reps] == [0.05, 0.15, 0.4]
    rates = [r.success_rate for r in reps]
    assert rates == sorted(rates)
    for r in reps:
        assert r.adv_f1 <= r.clean_f1 + 1e-12 and r.adv_acc <= r.clean_acc + 1e-12


def test_eps_zero_report_equals_clean(corpus):
    tr, te, sc = corpus
    m = train(tr, k=2, seed=0)
    rep = evaluate_under_attack(m, te, AttackBudget(0.0), sc)
    assert rep.adv_f1 == rep.clean_f1 and rep.adv_acc == rep.clean_acc
    assert rep.success_rate == 0 and np.array_equal(rep.X_adv, te.X)


def test_attack_is_deterministic(corpus):
    tr, te, sc = corpus
    m = train(tr, k=2, seed=0)
    b = AttackBudget(0.15, n_iters=40, seed=5)
    a1 = evaluate_under_attack(m, te, b, sc, threads=1)
    a2 = evaluate_under_attack(m, te, b, sc, threads=3)
    assert np.array_equal(a1.X_adv, a2.X_adv)
    assert [r.queries_used for r in a1.results] == [r.queries_used for r in a2.results]
