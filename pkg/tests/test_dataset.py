import base64

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scal.dataset import (
    N_FEATURES,
    PAYLOAD_WIDTH,
    TTL_COL,
    ClassSpec,
    DataError,
    PayloadRecord,
    SyntheticSpec,
    block_spec,
    feature_vector,
    from_records,
    generate_synthetic,
    load_csv,
    save_csv,
    split,
)

HEADER = "label,ttl,total_length,protocol,duration,payload_b64\n"


def _csv(tmp_path, rows, name="d.csv"):
    path = tmp_path / name
    path.write_text(HEADER + "".join(r + "\n" for r in rows))
    return path


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode()


def test_zero_padding_of_short_payload(tmp_path):
    path = _csv(tmp_path, [f"a,64,44,6,0.5,{_b64(b'ABCD')}"])
    data = load_csv(path)
    x = data.X[0]
    assert x.shape == (N_FEATURES,)
    assert list(x[:4]) == [65, 66, 67, 68]
    assert not x[4:PAYLOAD_WIDTH].any()
    assert list(x[PAYLOAD_WIDTH:]) == [64, 44, 6, 0.5]


def test_classes_sorted_unique(tmp_path):
    path = _csv(tmp_path, [f"{lab},64,40,6,0,{_b64(b'x')}" for lab in "aba"])
    data = load_csv(path)
    assert data.classes == ["a", "b"]
    assert len(data) == 3
    assert list(data.y) == [0, 1, 0]


def test_ttl_out_of_range_names_line(tmp_path):
    path = _csv(tmp_path, [f"a,64,40,6,0,{_b64(b'x')}", f"a,300,40,6,0,{_b64(b'x')}"])
    with pytest.raises(DataError, match=r"line 3.*field out of range"):
        load_csv(path)


def test_bad_base64_and_short_rows(tmp_path):
    with pytest.raises(DataError, match="line 2: payload decode"):
        load_csv(_csv(tmp_path, ["a,64,40,6,0,@@@"]))
    with pytest.raises(DataError, match="line 2: expected 6 fields"):
        load_csv(_csv(tmp_path, ["a,64,40"], "short.csv"))


def test_empty_file_and_header_only(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_csv(empty)
    only = tmp_path / "h.csv"
    only.write_text(HEADER)
    with pytest.raises(DataError, match="no data rows"):
        load_csv(only)


def test_long_payload_truncated(tmp_path):
    path = _csv(tmp_path, [f"a,1,2,3,0,{_b64(bytes(range(256)) * 7)}"])
    data = load_csv(path)
    assert data.lengths[0] == PAYLOAD_WIDTH
    assert data.payload(0) == (bytes(range(256)) * 7)[:PAYLOAD_WIDTH]


def test_csv_round_trip_keeps_trailing_zero_bytes(tmp_path):
    records = [
        PayloadRecord(b"ab\x00\x00", 10, 44, 17, 0.25, "x"),
        PayloadRecord(b"", 255, 0, 0, 0.0, "y"),
    ]
    data = from_records(records)
    save_csv(data, tmp_path / "r.csv")
    back = load_csv(tmp_path / "r.csv")
    assert back.classes == data.classes
    assert np.array_equal(back.X, data.X)
    assert [back.payload(i) for i in range(2)] == [b"ab\x00\x00", b""]


@given(st.binary(max_size=1600), st.integers(0, 255), st.integers(0, 65535), st.integers(0, 255),
       st.floats(0, 1e6, allow_nan=False))
@settings(max_examples=60, deadline=None)
def test_feature_vector_is_pure_and_padded(payload, ttl, length, proto, dur):
    rec = PayloadRecord(payload[:PAYLOAD_WIDTH], ttl, length, proto, dur, "c")
    a, b = feature_vector(rec), feature_vector(rec)
    assert np.array_equal(a, b)
    n = min(len(payload), PAYLOAD_WIDTH)
    assert not a[n:PAYLOAD_WIDTH].any()
    assert a[TTL_COL] == ttl


def test_split_stratified_and_deterministic():
    recs = [PayloadRecord(bytes([i % 7]), 1, 1, 1, 0, "a" if i < 50 else "b") for i in range(100)]
    data = from_records(recs)
    tr, te = split(data, 0.75, seed=3)
    assert len(tr) + len(te) == 100 and abs(len(tr) - 75) <= 2
    for c in range(2):
        assert abs((tr.y == c).sum() / (data.y == c).sum() - 0.75) <= 0.02
    tr2, te2 = split(data, 0.75, seed=3)
    assert np.array_equal(tr.X, tr2.X) and np.array_equal(te.y, te2.y)


def test_split_needs_two_per_class():
    recs = [PayloadRecord(b"a", 1, 1, 1, 0, "a")] * 5 + [PayloadRecord(b"b", 1, 1, 1, 0, "b")]
    with pytest.raises(DataError, match="cannot stratify"):
        split(from_records(recs))


def test_synthetic_preconditions():
    with pytest.raises(ValueError):
        SyntheticSpec(classes=[], overlap=1.5)
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(classes=[]))


def test_synthetic_deterministic_and_in_range():
    spec = block_spec(n_per_class=30)
    a, b = generate_synthetic(spec, 5), generate_synthetic(spec, 5)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert a.classes == ["c0", "c1", "c2", "c3"]
    assert a.X[:, :PAYLOAD_WIDTH].max() <= 255
    for i in range(len(a)):
        assert not a.X[i, a.lengths[i]:PAYLOAD_WIDTH].any()


def test_overlap_one_identical_sources_correlate():
    from scal.compressor import profile, train_class_models
    from scal.decomposition import correlation_matrix

    spec = SyntheticSpec([ClassSpec("a", 0, 300), ClassSpec("b", 0, 300)], overlap=1.0)
    # profile rows the dictionaries never saw, so memorized payloads do not dominate
    fit, held = split(generate_synthetic(spec, 1), 0.5, 0)
    r = correlation_matrix(profile(held, train_class_models(fit)))
    assert r[0, 1] > 0.9
