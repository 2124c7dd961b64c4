import json

import numpy as np
import pytest

from scal.cascade import (
    RoutingWarning,
    fit_cascade,
    infer,
    load_model,
    prune_model,
    random_partition,
    save_model,
    train,
    train_forest,
    train_global_tree,
    train_pseudo,
)
from scal.dataset import block_spec, generate_synthetic, split
from scal.decomposition import SubproblemPartition


@pytest.fixture(scope="module")
def small():
    data = generate_synthetic(block_spec(n_per_class=150), 2)
    return split(data, 0.75, 2)


@pytest.fixture(scope="module")
def scal_k2(small):
    tr, _ = small
    return train(tr, k=2, seed=2)


def test_k1_equals_global_tree(small):
    tr, te = small
    a = fit_cascade(tr, SubproblemPartition.single(4), seed=5)
    b = train_global_tree(tr, seed=5)
    assert a.distributor is None and list(a.locals) == [0]
    assert np.array_equal(a.predict(te.X), b.predict(te.X))
    assert (a.route(te.X) == 0).all()


def test_k2_structure_and_routing(scal_k2, small):
    _, te = small
    m = scal_k2
    assert m.k == 2 and m.distributor is not None
    assert sorted(m.locals) == [0, 1]
    pred, proba, route = m.infer_batch(te.X)
    assert np.array_equal(route, m.distributor.predict(te.X))
    assert np.allclose(proba.sum(axis=1), 1, atol=1e-9)
    assert np.array_equal(pred, proba.argmax(axis=1))
    # probability mass sits on the classes the routed local tree knows
    for g, tree in m.locals.items():
        rows = route == g
        outside = np.setdiff1d(np.arange(4), tree.labels)
        assert not proba[np.ix_(rows, outside)].any()
    c, p, r = infer(m, te.X[0])
    assert c == pred[0] and r == route[0]
    with pytest.raises(ValueError):
        m.predict(np.zeros((1, 10)))


def test_distributor_labels_follow_partition(scal_k2, small):
    tr, te = small
    assert scal_k2.partition.groups == ((0, 1), (2, 3))
    truth = scal_k2.partition.group_of()[te.y]
    # two balanced groups: chance is 0.5
    assert (scal_k2.route(te.X) == truth).mean() >= 0.7


def test_singleton_groups_have_no_local_tree(small):
    tr, te = small
    m = fit_cascade(tr, SubproblemPartition(((0,), (1, 2, 3))), seed=0)
    assert list(m.locals) == [1]
    pred, proba, route = m.infer_batch(te.X)
    single = route == 0
    assert (pred[single] == 0).all() and (proba[single, 0] == 1).all()


def test_all_singletons_is_distributor_only(small):
    tr, _ = small
    m = train_pseudo(tr, 4, seed=1)
    assert m.locals == {} and m.partition.k == 4


def test_random_partition_is_seeded_and_valid():
    a, b = random_partition(6, 3, seed=4), random_partition(6, 3, seed=4)
    assert a == b and a.k == 3
    assert sorted(c for g in a.groups for c in g) == list(range(6))
    with pytest.raises(ValueError):
        random_partition(4, 1)


def test_empty_route_gets_constant_tree(small):
    tr, _ = small
    # only classes 0 and 1 present: the distributor can never route to group {2, 3}
    data = tr.subset(np.flatnonzero(tr.y <= 1))
    with pytest.warns(RoutingWarning, match="no training instances"):
        m = fit_cascade(data, SubproblemPartition(((0, 1), (2, 3))), seed=0)
    assert m.locals[1].n_nodes == 1
    assert list(m.locals[1].labels) == [2]


def test_save_load_round_trip(tmp_path, scal_k2, small):
    _, te = small
    names = save_model(scal_k2, tmp_path)
    assert {"manifest.json", "distributor.tree", "local_000.tree", "local_001.tree"} <= set(names)
    assert any(n.endswith(".zdict") for n in names)
    back = load_model(tmp_path)
    assert np.array_equal(back.predict_proba(te.X), scal_k2.predict_proba(te.X))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["partition"]["groups"] == [["c0", "c1"], ["c2", "c3"]]
    size = (tmp_path / "manifest.json").stat().st_size + sum(
        (tmp_path / n).stat().st_size for n in ("distributor.tree", "local_000.tree", "local_001.tree"))
    assert scal_k2.serialized_bytes == size


def test_baseline_round_trip(tmp_path, small):
    tr, te = small
    f = train_forest(tr, n_estimators=3, seed=1)
    save_model(f, tmp_path / "f")
    back = load_model(tmp_path / "f")
    assert back.mode == "forest" and np.array_equal(back.predict(te.X), f.predict(te.X))
    assert f.serialized_bytes == sum(p.stat().st_size for p in (tmp_path / "f").iterdir())


def test_load_rejects_non_model_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path)


def test_prune_model_never_grows(small, scal_k2):
    tr, te = small
    g = train_global_tree(tr, seed=0)
    pg = prune_model(g, te, 0.0)
    assert pg.n_nodes <= g.n_nodes
    assert (pg.predict(te.X) == te.y).mean() >= (g.predict(te.X) == te.y).mean()
    ps = prune_model(scal_k2, te, 0.0)
    assert ps.n_nodes <= scal_k2.n_nodes


def test_training_needs_two_classes(small):
    tr, _ = small
    one = tr.subset(np.flatnonzero(tr.y == 0))
    one.classes = ["c0"]
    with pytest.raises(ValueError):
        train(one)
