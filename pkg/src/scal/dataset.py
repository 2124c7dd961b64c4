"""Payload datasets: CSV ingestion, fixed-width feature vectors, stratified
splits and synthetic desk-scale corpora with controllable class correlation.

A record becomes a 1504-wide vector: 1500 zero-padded payload bytes followed
by ttl, total_length, protocol and duration.
"""
from __future__ import annotations

import base64
import bisect
import binascii
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAYLOAD_WIDTH = 1500
HEADER_FIELDS = ("ttl", "total_length", "protocol", "duration")
N_FEATURES = PAYLOAD_WIDTH + len(HEADER_FIELDS)
CSV_COLUMNS = ("label", "ttl", "total_length", "protocol", "duration", "payload_b64")

TTL_COL = PAYLOAD_WIDTH
TOTAL_LENGTH_COL = PAYLOAD_WIDTH + 1
PROTOCOL_COL = PAYLOAD_WIDTH + 2
DURATION_COL = PAYLOAD_WIDTH + 3


class DataError(ValueError):
    """Raised for malformed or out-of-range input data."""


@dataclass(frozen=True)
class PayloadRecord:
    payload: bytes
    ttl: int
    total_length: int
    protocol: int
    duration: float
    label: str

    def __post_init__(self):
        if not 0 <= self.ttl <= 255:
            raise DataError(f"field out of range: ttl={self.ttl}")
        if not 0 <= self.protocol <= 255:
            raise DataError(f"field out of range: protocol={self.protocol}")
        if self.total_length < 0:
            raise DataError(f"field out of range: total_length={self.total_length}")
        if not self.duration >= 0:
            raise DataError(f"field out of range: duration={self.duration}")


def feature_vector(record: PayloadRecord) -> np.ndarray:
    """Zero-padded payload bytes followed by the four header fields."""
    x = np.zeros(N_FEATURES, dtype=np.float64)
    payload = record.payload[:PAYLOAD_WIDTH]
    x[: len(payload)] = np.frombuffer(payload, dtype=np.uint8)
    x[TTL_COL] = record.ttl
    x[TOTAL_LENGTH_COL] = record.total_length
    x[PROTOCOL_COL] = record.protocol
    x[DURATION_COL] = record.duration
    return x


@dataclass
class Dataset:
    """Feature matrix plus labels.

    ``lengths`` keeps the true payload length of each row so the original
    bytes can be recovered from the zero-padded matrix (trailing zero bytes
    are otherwise indistinguishable from padding).
    """

    X: np.ndarray
    y: np.ndarray
    classes: list[str]
    lengths: np.ndarray
    split_seed: int | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.lengths = np.asarray(self.lengths, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[1] != N_FEATURES:
            raise DataError(f"feature matrix must be (n, {N_FEATURES}), got {self.X.shape}")
        if not (len(self.y) == len(self.X) == len(self.lengths)):
            raise DataError("X, y and lengths must have the same number of rows")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= len(self.classes)):
            raise DataError("label index outside the class list")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def payload(self, i: int) -> bytes:
        return self.X[i, : self.lengths[i]].astype(np.uint8).tobytes()

    def payloads(self) -> list[bytes]:
        return [self.payload(i) for i in range(len(self))]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def subset(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], list(self.classes), self.lengths[idx], self.split_seed)

    def record(self, i: int) -> PayloadRecord:
        x = self.X[i]
        return PayloadRecord(
            payload=self.payload(i),
            ttl=int(x[TTL_COL]),
            total_length=int(x[TOTAL_LENGTH_COL]),
            protocol=int(x[PROTOCOL_COL]),
            duration=float(x[DURATION_COL]),
            label=self.classes[self.y[i]],
        )


def from_records(records: Sequence[PayloadRecord], classes: Sequence[str] | None = None) -> Dataset:
    if classes is None:
        classes = sorted({r.label for r in records})
    index = {c: i for i, c in enumerate(classes)}
    X = np.zeros((len(records), N_FEATURES), dtype=np.float64)
    for i, r in enumerate(records):
        X[i] = feature_vector(r)
    y = np.array([index[r.label] for r in records], dtype=np.int64)
    lengths = np.array([min(len(r.payload), PAYLOAD_WIDTH) for r in records], dtype=np.int64)
    return Dataset(X, y, list(classes), lengths)


def _parse_int(value: str, name: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise DataError(f"line {lineno}: field {name!r} is not an integer: {value!r}") from None


def load_csv(path: str | Path) -> Dataset:
    path = Path(path)
    records: list[PayloadRecord] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        if tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise DataError(f"{path}: line 1: expected header {','.join(CSV_COLUMNS)}")
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise DataError(f"line {lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
            label, ttl, total_length, protocol, duration, payload_b64 = row
            try:
                payload = base64.b64decode(payload_b64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise DataError(f"line {lineno}: payload decode failure: {exc}") from None
            try:
                dur = float(duration)
            except ValueError:
                raise DataError(f"line {lineno}: field 'duration' is not a number: {duration!r}") from None
            try:
                records.append(
                    PayloadRecord(
                        payload=payload[:PAYLOAD_WIDTH],
                        ttl=_parse_int(ttl, "ttl", lineno),
                        total_length=_parse_int(total_length, "total_length", lineno),
                        protocol=_parse_int(protocol, "protocol", lineno),
                        duration=dur,
                        label=label,
                    )
                )
            except DataError as exc:
                if str(exc).startswith("line "):
                    raise
                raise DataError(f"line {lineno}: {exc}") from None
    if not records:
        raise DataError(f"{path}: no data rows")
    return from_records(records)


def save_csv(data: Dataset, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(len(data)):
            x = data.X[i]
            writer.writerow([
                data.classes[data.y[i]],
                int(x[TTL_COL]),
                int(x[TOTAL_LENGTH_COL]),
                int(x[PROTOCOL_COL]),
                repr(float(x[DURATION_COL])),
                base64.b64encode(data.payload(i)).decode("ascii"),
            ])


def split(data: Dataset, train_fraction: float = 0.75, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified, seeded train/test split. Row order is preserved within each part."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    for c in range(data.n_classes):
        members = np.flatnonzero(data.y == c)
        if len(members) == 0:
            continue
        if len(members) < 2:
            raise DataError(f"class {data.classes[c]!r} has {len(members)} instance(s); cannot stratify")
        n_train = int(round(train_fraction * len(members)))
        n_train = min(max(n_train, 1), len(members) - 1)
        train_idx.append(rng.permutation(members)[:n_train])
    mask = np.zeros(len(data), dtype=bool)
    mask[np.concatenate(train_idx)] = True
    train, test = data.subset(np.flatnonzero(mask)), data.subset(np.flatnonzero(~mask))
    train.split_seed = test.split_seed = seed
    return train, test


# --------------------------------------------------------------------------
# synthetic corpora


@dataclass
class ClassSpec:
    """One synthetic class.

    ``ttl`` and ``protocol`` are sets of values drawn uniformly; ``length`` is
    an inclusive payload-length range and ``duration`` the mean of an
    exponential. ``source`` is ``"markov"`` or ``"template"``.
    """

    name: str
    group: int
    n: int
    source: str = "markov"
    ttl: tuple[int, ...] = (64,)
    protocol: tuple[int, ...] = (6,)
    length: tuple[int, int] = (120, 360)
    duration: float = 1.0


@dataclass
class SyntheticSpec:
    classes: list[ClassSpec]
    overlap: float = 0.0
    alphabet: int = 24
    segment: tuple[int, int] = (8, 24)
    noise: float = 0.02
    header_bytes: int = 0

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must be in [0, 1], got {self.overlap}")


class _MarkovSource:
    """Order-1 Markov chain over a random byte alphabet."""

    def __init__(self, rng: np.random.Generator, alphabet: int, fanout: int = 3):
        self.symbols = rng.choice(256, size=alphabet, replace=False).astype(np.uint8)
        self.succ = rng.integers(0, alphabet, size=(alphabet, fanout))
        self.prob = rng.dirichlet(np.full(fanout, 0.7), size=alphabet)

    def emit(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cdf = np.cumsum(self.prob, axis=1)
        cdf[:, -1] = 1.0
        succ = self.succ.tolist()
        cdf_rows = cdf.tolist()
        states = [0] * n
        state = int(rng.integers(len(self.symbols)))
        for i, u in enumerate(rng.random(n).tolist()):
            states[i] = state
            state = succ[state][bisect.bisect_left(cdf_rows[state], u)]
        return self.symbols[states]


class _TemplateSource:
    """Fixed byte template; emission reads a random window of it."""

    def __init__(self, rng: np.random.Generator, alphabet: int, size: int = 512):
        symbols = rng.choice(256, size=alphabet, replace=False).astype(np.uint8)
        self.template = symbols[rng.integers(0, alphabet, size=size)]

    def emit(self, rng: np.random.Generator, n: int) -> np.ndarray:
        start = int(rng.integers(0, len(self.template)))
        idx = (start + np.arange(n)) % len(self.template)
        return self.template[idx].copy()


def _make_source(kind: str, rng: np.random.Generator, alphabet: int):
    if kind == "markov":
        return _MarkovSource(rng, alphabet)
    if kind == "template":
        return _TemplateSource(rng, alphabet)
    raise ValueError(f"unknown byte source {kind!r}")


def generate_synthetic(spec: SyntheticSpec, seed: int = 0) -> Dataset:
    """Sample a labeled corpus.

    Each payload is a run of segments; a segment comes from the class's group
    source with probability ``spec.overlap`` and from the class's own source
    otherwise, so same-group classes share that fraction of their material.
    A short per-class header (``header_bytes``) is prepended when requested.
    """
    if len(spec.classes) < 2:
        raise ValueError("a synthetic corpus needs at least 2 classes")
    rng = np.random.default_rng(seed)
    groups = sorted({c.group for c in spec.classes})
    group_src = {g: _make_source(next(c.source for c in spec.classes if c.group == g), rng, spec.alphabet)
                 for g in groups}
    class_src = [_make_source(c.source, rng, spec.alphabet) for c in spec.classes]
    class_header = [rng.integers(0, 256, size=spec.header_bytes).astype(np.uint8) for _ in spec.classes]

    names = sorted(c.name for c in spec.classes)
    if len(set(names)) != len(names):
        raise ValueError("class names must be unique")
    index = {name: i for i, name in enumerate(names)}

    total = sum(c.n for c in spec.classes)
    X = np.zeros((total, N_FEATURES), dtype=np.float64)
    y = np.zeros(total, dtype=np.int64)
    lengths = np.zeros(total, dtype=np.int64)
    row = 0
    for ci, cs in enumerate(spec.classes):
        for _ in range(cs.n):
            n = int(rng.integers(cs.length[0], cs.length[1] + 1))
            n = min(n, PAYLOAD_WIDTH)
            parts = [class_header[ci]]
            filled = len(class_header[ci])
            while filled < n:
                seg = int(rng.integers(spec.segment[0], spec.segment[1] + 1))
                src = group_src[cs.group] if rng.random() < spec.overlap else class_src[ci]
                parts.append(src.emit(rng, seg))
                filled += seg
            payload = np.concatenate(parts)[:n]
            if spec.noise > 0:
                flip = rng.random(n) < spec.noise
                payload[flip] = rng.integers(0, 256, size=int(flip.sum()))
            X[row, :n] = payload
            X[row, TTL_COL] = cs.ttl[int(rng.integers(len(cs.ttl)))]
            X[row, PROTOCOL_COL] = cs.protocol[int(rng.integers(len(cs.protocol)))]
            X[row, TOTAL_LENGTH_COL] = n + 40
            X[row, DURATION_COL] = round(float(rng.exponential(cs.duration)), 6)
            y[row] = index[cs.name]
            lengths[row] = n
            row += 1
    return Dataset(X, y, names, lengths)


def block_spec(
    n_groups: int = 2,
    classes_per_group: int = 2,
    n_per_class: int | Iterable[int] = 1000,
    overlap: float = 0.5,
    source: str = "markov",
    noise: float = 0.0,
) -> SyntheticSpec:
    """Classes in the same group share ``overlap`` of their byte material.

    Header fields are deliberately uninformative about group membership;
    within the last group, ttl separates the classes while other groups
    draw ttl at random from the same values.
    """
    n_total = n_groups * classes_per_group
    counts = [n_per_class] * n_total if isinstance(n_per_class, int) else list(n_per_class)
    if len(counts) != n_total:
        raise ValueError("n_per_class must give one count per class")
    ttls = tuple(32 + 32 * j for j in range(classes_per_group))
    classes = []
    for g in range(n_groups):
        for j in range(classes_per_group):
            ci = g * classes_per_group + j
            ttl = (ttls[j],) if g == n_groups - 1 else ttls
            classes.append(ClassSpec(name=f"c{ci}", group=g, n=counts[ci], source=source, ttl=ttl))
    return SyntheticSpec(classes=classes, overlap=overlap, noise=noise)
