"""Evaluation metrics and the per-arm results table."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

# Default bin thresholds for the olfactory pleasantness (Y) and descriptor (E) scales.
OLFACTORY_Y_THRESHOLDS = (33.66, 49.68)
OLFACTORY_E_THRESHOLDS = (2.72, 6.57)

COLUMNS = ("y_acc", "y_mae_disc", "y_mae_cont", "e_mae_disc", "e_mae_cont", "e_acc")
HIGHER_IS_BETTER = {"y_acc", "e_acc"}
COLUMN_TITLES = {
    "y_acc": "Y acc",
    "y_mae_disc": "Y MAE disc",
    "y_mae_cont": "Y MAE cont",
    "e_mae_disc": "E MAE disc",
    "e_mae_cont": "E MAE cont",
    "e_acc": "E acc",
}

ARM_ORDER = (
    "baseline_Y",
    "baseline_E",
    "multitask",
    "embed_Y_knn",
    "embed_E_knn",
    "pairwise_Y_knn",
    "pairwise_E_knn",
    "pairwise_YE_knn",
)


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class Discretizer:
    t1: float
    t2: float

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise ValueError("thresholds must satisfy t1 < t2")

    @classmethod
    def from_training_tertiles(cls, values) -> "Discretizer":
        t1, t2 = np.quantile(np.asarray(values, float).ravel(), [1 / 3, 2 / 3])
        return cls(float(t1), float(t2))


def discretize(values, d: Discretizer) -> np.ndarray:
    """Map to {-1, 0, 1}: below t1, in [t1, t2), at or above t2."""
    v = np.asarray(values, float)
    return np.where(v < d.t1, -1, np.where(v < d.t2, 0, 1)).astype(np.int64)


def _pair(pred, target):
    pred, target = np.asarray(pred, float), np.asarray(target, float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty inputs")
    return pred, target


def mae(pred, target) -> float:
    """Per-sample absolute error (summed over attributes for 2-D input), averaged."""
    pred, target = _pair(pred, target)
    err = np.abs(pred - target)
    if err.ndim > 1:
        err = err.reshape(err.shape[0], -1).sum(axis=1)
    return float(err.mean())


def zero_one_accuracy(pred_classes, target_classes) -> float:
    pred, target = np.asarray(pred_classes), np.asarray(target_classes)
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty inputs")
    return float(np.mean(pred == target))


def explanation_l1(pred_e, target_e, d: Discretizer | None = None) -> dict[str, float]:
    """Mean per-sample l1 distance between explanation matrices.

    Returns ``{"continuous": ..., "discretized": ...}``; the discretized value
    is present only when a discretizer is given.
    """
    pred, target = _pair(pred_e, target_e)
    if pred.ndim != 2:
        raise ValueError("explanations must be (n_samples, n_attributes)")
    out = {"continuous": mae(pred, target)}
    if d is not None:
        out["discretized"] = mae(discretize(pred, d), discretize(target, d))
    return out


# -- arm evaluation ----------------------------------------------------------


def evaluate(
    y_pred=None,
    y_true=None,
    e_pred=None,
    e_true=None,
    y_disc: Discretizer | None = None,
    e_disc: Discretizer | None = None,
    y_categorical=False,
    e_categorical=False,
) -> dict[str, float | None]:
    """All metric columns for one row; missing predictions give ``None``."""
    row: dict[str, float | None] = dict.fromkeys(COLUMNS)
    if y_pred is not None:
        if y_categorical:
            row["y_acc"] = zero_one_accuracy(y_pred, y_true)
        else:
            yp, yt = discretize(y_pred, y_disc), discretize(y_true, y_disc)
            row["y_acc"] = zero_one_accuracy(yp, yt)
            row["y_mae_disc"] = mae(yp, yt)
            row["y_mae_cont"] = mae(y_pred, y_true)
    if e_pred is not None:
        if e_categorical:
            row["e_acc"] = zero_one_accuracy(e_pred, e_true)
        else:
            l1 = explanation_l1(e_pred, e_true, e_disc)
            row["e_mae_disc"] = l1["discretized"]
            row["e_mae_cont"] = l1["continuous"]
    return row


@dataclass(frozen=True)
class ArmResult:
    arm: str
    param: float | None  # k for kNN arms, lambda for multitask, None otherwise
    n_eval: int
    metrics: dict[str, float | None]
    cited: bool = False


@dataclass
class MetricsReport:
    name: str
    eval_split: str
    n_eval: int
    rows: list[dict] = field(default_factory=list)

    def columns(self) -> list[str]:
        return [c for c in COLUMNS if any(r[c] is not None for r in self.rows)]

    def to_dict(self) -> dict:
        return {
            "experiment": self.name,
            "eval_split": self.eval_split,
            "n_eval": self.n_eval,
            "columns": self.columns(),
            "rows": self.rows,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(data["experiment"], data["eval_split"], data["n_eval"], list(data["rows"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        cols = self.columns()
        header = ["arm", "k/lambda", *(COLUMN_TITLES[c] for c in cols)]
        lines = []
        for r in self.rows:
            cells = [r["arm"] + (" (cited)" if r.get("cited") else ""), _fmt_param(r["param"])]
            for c in cols:
                v = r[c]
                cells.append("NA" if v is None else f"{v:.4f}" + ("*" if c in r["best"] else ""))
            lines.append(cells)
        widths = [max(len(x[i]) for x in [header, *lines]) for i in range(len(header))]
        fmt = lambda cells: "  ".join(  # noqa: E731
            c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))
        )
        rule = "-" * len(fmt(header))
        body = [fmt(header), rule]
        prev = None
        for r, cells in zip(self.rows, lines):
            if prev is not None and r["arm"] != prev:
                body.append(rule)
            body.append(fmt(cells))
            prev = r["arm"]
        note = f"# {self.name}: evaluated on {self.eval_split} split (n = {self.n_eval}); * = best within arm"
        return "\n".join([note, *body]) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        js, txt = out_dir / "report.json", out_dir / "report.txt"
        js.write_text(self.to_json())
        txt.write_text(self.to_table())
        return js, txt


def _fmt_param(p):
    if p is None:
        return "NA"
    return str(int(p)) if float(p).is_integer() else f"{p:g}"


def compile_report(
    results: Sequence[ArmResult], name: str = "experiment", eval_split: str = "test"
) -> MetricsReport:
    if not results:
        raise ReportError("no arm results to report")
    sizes = {r.n_eval for r in results if not r.cited}
    if len(sizes) > 1:
        raise ReportError(f"arms were evaluated on different set sizes: {sorted(sizes)}")
    rank = {a: i for i, a in enumerate(ARM_ORDER)}

    def key(r: ArmResult):
        return (
            not r.cited,
            rank.get(r.arm, len(rank)),
            r.arm,
            -math.inf if r.param is None else r.param,
        )

    ordered = sorted(results, key=key)
    rows = []
    for r in ordered:
        row = {"arm": r.arm, "param": r.param, "cited": r.cited, "best": []}
        row.update({c: r.metrics.get(c) for c in COLUMNS})
        rows.append(row)
    for arm in dict.fromkeys(r["arm"] for r in rows):
        group = [r for r in rows if r["arm"] == arm]
        for c in COLUMNS:
            vals = [r[c] for r in group if r[c] is not None]
            if not vals:
                continue
            best = max(vals) if c in HIGHER_IS_BETTER else min(vals)
            for r in group:
                if r[c] is not None and r[c] == best:
                    r["best"].append(c)
    n_eval = sizes.pop() if sizes else results[0].n_eval
    return MetricsReport(name, eval_split, n_eval, rows)


def read_report(path: str | Path) -> MetricsReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return MetricsReport.from_dict(json.loads(path.read_text()))
