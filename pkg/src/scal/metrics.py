"""Imbalance-aware evaluation, per-class gain tables and cost accounting."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    """2PR/(P+R) per class; 0 when precision and recall are both 0 or undefined."""
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    actual = cm.sum(axis=1).astype(np.float64)
    denom = predicted + actual
    # 2PR/(P+R) reduces to 2TP/(predicted + actual)
    return np.divide(2.0 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> float:
    return float(per_class_f1(confusion_matrix(y_true, y_pred, n_classes)).mean())


@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    per_class_f1: np.ndarray
    confusion: np.ndarray
    classes: list[str]
    model_bytes: int = 0
    n_nodes_total: int = 0
    train_seconds: float | None = None
    # classes that appear in neither the truth nor the predictions
    absent: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        out = {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "model_bytes": self.model_bytes,
            "n_nodes_total": self.n_nodes_total,
        }
        if self.train_seconds is not None:
            out["train_seconds"] = self.train_seconds
        for c, f in zip(self.classes, self.per_class_f1):
            out[f"f1[{c}]"] = float(f)
        return out


def report_from_predictions(y_true: np.ndarray, y_pred: np.ndarray, classes: Sequence[str]) -> EvalReport:
    n = len(classes)
    cm = confusion_matrix(y_true, y_pred, n)
    f1 = per_class_f1(cm)
    absent = [classes[c] for c in range(n) if cm[c].sum() == 0 and cm[:, c].sum() == 0]
    return EvalReport(
        accuracy=float(np.trace(cm) / cm.sum()),
        macro_f1=float(f1.mean()),
        per_class_f1=f1,
        confusion=cm,
        classes=list(classes),
        absent=absent,
    )


def evaluate(model, test, record_time: bool = False) -> EvalReport:
    """Score ``model`` on a Dataset. Model classes must match the test classes."""
    if len(test) == 0:
        raise ValueError("test set is empty")
    model_classes = getattr(model, "classes", None)
    if model_classes is not None and list(model_classes) != list(test.classes):
        raise ValueError(f"class domain mismatch: model {list(model_classes)} vs data {list(test.classes)}")
    if getattr(model, "n_classes", test.n_classes) != test.n_classes:
        raise ValueError("class domain mismatch: model and data disagree on the number of classes")
    report = report_from_predictions(test.y, model.predict(test.X), test.classes)
    report.model_bytes = int(model.serialized_bytes)
    report.n_nodes_total = int(model.n_nodes)
    if record_time:
        report.train_seconds = float(getattr(model, "train_seconds", 0.0))
    return report


@dataclass
class GainRow:
    cls: str
    global_f1: float
    scal_f1: float
    delta: float
    flagged: bool


def compare_local_gains(global_report: EvalReport, scal_report: EvalReport, flag_at: float = 0.05) -> list[GainRow]:
    """Per-class F1 change from the global model to SCAL, largest gain first."""
    if list(global_report.classes) != list(scal_report.classes):
        raise ValueError("reports cover different class lists")
    rows = [
        GainRow(c, float(g), float(s), float(s - g), abs(s - g) > flag_at)
        for c, g, s in zip(global_report.classes, global_report.per_class_f1, scal_report.per_class_f1)
    ]
    return sorted(rows, key=lambda r: -r.delta)


@dataclass
class CostRow:
    name: str
    model_bytes: int
    n_nodes: int
    train_seconds: float | None
    ratio: float


def cost_report(models: Sequence[tuple[str, object]], reference: str | None = None,
                record_time: bool = False) -> list[CostRow]:
    """Size/time table; ``ratio`` is each model's bytes over the reference's.

    The reference defaults to the first model whose name starts with "scal",
    else the first model.
    """
    if not models:
        return []
    names = [n for n, _ in models]
    if reference is None:
        reference = next((n for n in names if n.lower().startswith("scal")), names[0])
    ref_bytes = dict(models)[reference].serialized_bytes
    return [
        CostRow(
            name,
            int(m.serialized_bytes),
            int(m.n_nodes),
            float(getattr(m, "train_seconds", 0.0)) if record_time else None,
            m.serialized_bytes / ref_bytes,
        )
        for name, m in models
    ]


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


# --------------------------------------------------------------------------
# CSV output: floats at 9 significant digits, optional "# key=value" preamble


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def write_table(rows: Sequence[dict], out, preamble: dict | None = None) -> None:
    if preamble:
        for key in sorted(preamble):
            out.write(f"# {key}={preamble[key]}\n")
    if not rows:
        return
    columns = list(rows[0])
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c, "")) for c in columns])


def read_table(text: str) -> list[dict]:
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def report_rows(report: EvalReport) -> list[dict]:
    return [report.summary()]
