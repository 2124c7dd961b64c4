import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scal.decomposition import SubproblemPartition, cluster, correlation_matrix, select_k


def test_identical_and_negated_columns():
    a = np.array([1.0, 4.0, 2.0, 8.0, 5.0])
    r = correlation_matrix(np.column_stack([a, a, 10 - a]))
    assert r[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert r[0, 2] == pytest.approx(-1.0, abs=1e-12)


def test_hand_computed_four_rows():
    # x = 1,2,3,4 ; y = 2,1,4,3 : dx = -1.5,-.5,.5,1.5 ; dy = -.5,-1.5,1.5,.5
    # sum dxdy = .75+.75+.75+.75 = 3 ; sum dx^2 = sum dy^2 = 5  -> r = 0.6
    prof = np.array([[1, 2], [2, 1], [3, 4], [4, 3]], dtype=float)
    assert correlation_matrix(prof)[0, 1] == pytest.approx(0.6, abs=1e-9)


def test_too_few_rows():
    with pytest.raises(ValueError):
        correlation_matrix(np.ones((2, 3)))


def test_constant_column_gets_zero_with_warning():
    prof = np.array([[1, 5, 2], [2, 5, 4], [3, 5, 7], [4, 5, 1]], dtype=float)
    with pytest.warns(RuntimeWarning, match="constant"):
        r = correlation_matrix(prof)
    assert r[1, 0] == 0 and r[1, 2] == 0 and r[1, 1] == 1


@given(st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_matrix_invariants(seed):
    rng = np.random.default_rng(seed)
    prof = rng.random((30, 5)) @ rng.random((5, 5))
    r = correlation_matrix(prof)
    assert np.allclose(r, r.T, atol=1e-9)
    assert np.allclose(np.diag(r), 1, atol=1e-9)
    assert (np.abs(r) <= 1).all()


def test_block_matrix_clusters_into_blocks():
    r = np.array([[1, .9, .1, .1], [.9, 1, .1, .1], [.1, .1, 1, .9], [.1, .1, .9, 1]])
    assert cluster(r, 2).groups == ((0, 1), (2, 3))
    assert cluster(r, 4).groups == ((0,), (1,), (2,), (3,))
    assert cluster(r, 1).groups == ((0, 1, 2, 3),)
    with pytest.raises(ValueError):
        cluster(r, 5)


def test_average_linkage_not_single_linkage():
    # single linkage would chain 2 onto {0,1} via r(1,2)=.85; average uses (.85+.0)/2
    r = np.array([
        [1, .95, .0, .0],
        [.95, 1, .85, .0],
        [.0, .85, 1, .5],
        [.0, .0, .5, 1],
    ])
    assert cluster(r, 2).groups == ((0, 1), (2, 3))


def test_ties_break_to_lowest_indices():
    r = np.eye(4)  # every pair at distance 1
    assert cluster(r, 3).groups == ((0, 1), (2,), (3,))
    assert cluster(r, 2).groups == ((0, 1, 2), (3,))


@given(st.integers(0, 500), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_partition_properties_and_affine_invariance(seed, k):
    rng = np.random.default_rng(seed)
    prof = rng.random((40, 6)) @ rng.random((6, 6))
    k = min(k, 6)
    part = cluster(correlation_matrix(prof), k)
    members = sorted(c for g in part.groups for c in g)
    assert members == list(range(6)) and part.k == k
    scaled = prof * np.array([8, 1, 2, 3, 0.5, 7]) + np.array([1, -3, 0, 9, 2, 4])
    assert cluster(correlation_matrix(scaled), k).groups == part.groups


def test_partition_validation_and_serialization():
    with pytest.raises(ValueError):
        SubproblemPartition(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        SubproblemPartition(((0,), ()))
    with pytest.raises(ValueError):
        SubproblemPartition(((0, 2),))
    p = SubproblemPartition(((3, 2), (1, 0)), {1: 0.5, 2: 0.75})
    assert p.groups == ((0, 1), (2, 3))
    assert list(p.group_of()) == [0, 0, 1, 1]
    d = p.to_dict(["a", "b", "c", "d"])
    assert d["groups"] == [["a", "b"], ["c", "d"]] and d["k"] == 2
    back = SubproblemPartition.from_dict(d, ["a", "b", "c", "d"])
    assert back == p and back.scores == p.scores


def test_select_k_max_one_is_fallback():
    from scal.dataset import block_spec, generate_synthetic

    data = generate_synthetic(block_spec(n_per_class=20), 0)
    part = select_k(data, None, np.eye(4), k_max=1)
    assert part.k == 1
