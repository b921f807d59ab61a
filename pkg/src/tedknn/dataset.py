"""(X, Y, E) datasets: CSV loading, preprocessing, splitting and synthesis."""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

TRAIN, VALIDATION, TEST = "train", "validation", "test"
SPLITS = (TRAIN, VALIDATION, TEST)
KINDS = ("continuous", "categorical")

# std below this is treated as a constant column
DEGENERATE_STD = 1e-12


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Aligned features, labels and explanations with a split tag per row.

    ``labels`` is a float vector for continuous Y or an int vector of class
    indices for categorical Y. ``explanations`` is a float matrix
    (n_samples x n_expl) for continuous E or an int vector for categorical E.
    """

    features: np.ndarray
    labels: np.ndarray
    explanations: np.ndarray
    split: np.ndarray
    feature_names: tuple[str, ...] = ()
    explanation_names: tuple[str, ...] = ()
    label_kind: str = "continuous"
    explanation_kind: str = "continuous"

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        if self.labels.shape[0] != n or self.explanations.shape[0] != n:
            raise DatasetError(
                f"sample counts differ: features {n}, labels {self.labels.shape[0]}, "
                f"explanations {self.explanations.shape[0]}"
            )
        if self.split.shape != (n,):
            raise DatasetError("exactly one split tag per sample is required")
        bad = set(np.unique(self.split)) - set(SPLITS)
        if bad:
            raise DatasetError(f"unknown split tags {sorted(bad)}")
        for name, kind, arr in (
            ("label", self.label_kind, self.labels),
            ("explanation", self.explanation_kind, self.explanations),
        ):
            if kind not in KINDS:
                raise DatasetError(f"{name}_kind must be one of {KINDS}, got {kind!r}")
            if kind == "categorical":
                if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
                    raise DatasetError(f"categorical {name}s must be an integer vector")
                if arr.size and arr.min() < 0:
                    raise DatasetError(f"categorical {name}s must be non-negative")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_label_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.label_kind == "categorical" else 0

    @property
    def n_explanation_classes(self) -> int:
        if self.explanation_kind != "categorical":
            return 0
        return int(self.explanations.max()) + 1

    def mask(self, split: str) -> np.ndarray:
        return self.split == split

    def rows(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.split == split)


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def inverse(self) -> "StandardizationStats":
        """Stats whose application undoes this one."""
        return StandardizationStats(mean=-self.mean / self.std, std=1.0 / self.std)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded synthetic (X, Y, E) dataset.

    Latent codes drive both the features (through a random linear expansion)
    and the explanations; labels are a function of the explanations, so E
    carries strictly more information about Y than X does.
    """

    n_samples: int = 500
    n_features: int = 50
    n_latent: int = 8
    n_explanations: int = 10
    explanation_kind: str = "continuous"
    n_clusters: int = 3
    label_kind: str = "continuous"
    n_label_classes: int = 3
    label_noise: float = 0.0
    feature_noise: float = 0.1
    label_scale: float = 10.0
    label_offset: float = 50.0
    split: tuple[int, int, int] | None = None
    seed: int = 0

    def validate(self) -> None:
        if min(self.n_samples, self.n_features, self.n_latent) < 1:
            raise DatasetError("n_samples, n_features and n_latent must be positive")
        if self.n_latent > self.n_features:
            raise DatasetError("n_latent must not exceed n_features")
        if self.label_noise < 0 or self.feature_noise < 0:
            raise DatasetError("noise levels must be non-negative")
        if self.explanation_kind not in KINDS or self.label_kind not in KINDS:
            raise DatasetError(f"kinds must be one of {KINDS}")
        if self.explanation_kind == "continuous" and self.n_explanations < 1:
            raise DatasetError("n_explanations must be positive")
        if self.explanation_kind == "categorical" and self.n_clusters < 2:
            raise DatasetError("n_clusters must be at least 2")
        if self.label_kind == "categorical" and self.n_label_classes < 2:
            raise DatasetError("n_label_classes must be at least 2")
        if self.split is not None and sum(self.split) != self.n_samples:
            raise DatasetError("split counts must sum to n_samples")
        if not 0 <= self.seed < 2**64:
            raise DatasetError("seed must be an unsigned 64-bit integer")


# -- schema & CSV ----------------------------------------------------------


@dataclass(frozen=True)
class Schema:
    label_column: str
    feature_columns: tuple[str, ...] | str = "rest"
    explanation_columns: tuple[str, ...] = ()
    label_kind: str = "continuous"
    explanation_kind: str = "continuous"


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def read_schema(path: str | Path) -> Schema:
    """Parse a ``key = value`` schema sidecar file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"schema file not found: {path}")
    parser = configparser.ConfigParser()
    text = path.read_text()
    if not text.lstrip().startswith("["):
        text = "[schema]\n" + text
    parser.read_string(text, source=str(path))
    sect = parser[parser.sections()[0]]
    if "label_column" not in sect:
        raise DatasetError(f"{path}: schema must name label_column")
    feats = sect.get("feature_columns", "rest").strip()
    return Schema(
        label_column=sect["label_column"].strip(),
        feature_columns="rest" if feats == "rest" else _split_list(feats),
        explanation_columns=_split_list(sect.get("explanation_columns", "")),
        label_kind=sect.get("label_kind", "continuous").strip(),
        explanation_kind=sect.get("explanation_kind", "continuous").strip(),
    )


def write_schema(schema: Schema, path: str | Path) -> None:
    feats = schema.feature_columns
    lines = [
        f"label_column = {schema.label_column}",
        f"explanation_columns = {', '.join(schema.explanation_columns)}",
        f"feature_columns = {feats if isinstance(feats, str) else ', '.join(feats)}",
        f"label_kind = {schema.label_kind}",
        f"explanation_kind = {schema.explanation_kind}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path: str | Path, schema: Schema) -> Dataset:
    """Read a headed CSV into a Dataset; every row is tagged ``train``.

    Use :func:`split_fixed` afterwards to assign official splits.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty dataset") from None
        body = [row for row in reader if row]

    if not body:
        raise DatasetError(f"{path}: empty dataset")
    col = {name: i for i, name in enumerate(header)}
    wanted = [schema.label_column, *schema.explanation_columns]
    if schema.feature_columns != "rest":
        wanted += list(schema.feature_columns)
    missing = [c for c in wanted if c not in col]
    if missing:
        raise DatasetError(f"{path}: columns absent from header: {missing}")
    if schema.feature_columns == "rest":
        taken = {schema.label_column, *schema.explanation_columns}
        feature_cols = tuple(h for h in header if h not in taken)
    else:
        feature_cols = tuple(schema.feature_columns)
    if not feature_cols:
        raise DatasetError(f"{path}: at least one feature column is required")

    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetError(
                f"{path}:{lineno}: ragged row ({len(row)} cells, header has {len(header)})"
            )

    def numeric(names):
        idx = [col[c] for c in names]
        out = np.empty((len(body), len(idx)))
        for r, row in enumerate(body):
            for j, c in enumerate(idx):
                try:
                    out[r, j] = float(row[c])
                except ValueError:
                    raise DatasetError(
                        f"{path}:{r + 2}: non-numeric cell {row[c]!r} in column {header[c]!r}"
                    ) from None
        return out

    def as_classes(values, what):
        if not np.all(values == np.round(values)) or values.min() < 0:
            raise DatasetError(f"{path}: categorical {what} column must hold class indices")
        return values.astype(np.int64)

    features = numeric(feature_cols)
    labels = numeric([schema.label_column])[:, 0]
    if schema.label_kind == "categorical":
        labels = as_classes(labels, "label")
    if schema.explanation_kind == "categorical":
        if len(schema.explanation_columns) != 1:
            raise DatasetError("categorical explanations need exactly one column")
        expl = as_classes(numeric(schema.explanation_columns)[:, 0], "explanation")
    else:
        expl = numeric(schema.explanation_columns)

    return Dataset(
        features=features,
        labels=labels,
        explanations=expl,
        split=np.full(len(body), TRAIN, dtype="<U10"),
        feature_names=feature_cols,
        explanation_names=tuple(schema.explanation_columns),
        label_kind=schema.label_kind,
        explanation_kind=schema.explanation_kind,
    )


def save_csv(d: Dataset, path: str | Path, label_name: str = "label") -> Schema:
    """Write a dataset in the layout :func:`load_csv` reads; returns its schema."""
    fnames = d.feature_names or tuple(f"x{i}" for i in range(d.n_features))
    if d.explanation_kind == "categorical":
        enames = d.explanation_names or ("explanation",)
        expl = d.explanations[:, None]
    else:
        enames = d.explanation_names or tuple(
            f"e{i}" for i in range(d.explanations.shape[1])
        )
        expl = d.explanations
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([label_name, *enames, *fnames])
        for i in range(d.n_samples):
            w.writerow(
                [repr(v.item()) for v in (d.labels[i], *expl[i], *d.features[i])]
            )
    return Schema(
        label_column=label_name,
        feature_columns="rest",
        explanation_columns=tuple(enames),
        label_kind=d.label_kind,
        explanation_kind=d.explanation_kind,
    )


# -- transforms --------------------------------------------------------------


def log_transform(d: Dataset) -> Dataset:
    shifted = 100.0 + d.features
    if np.any(shifted <= 0):
        r, c = np.argwhere(shifted <= 0)[0]
        raise DatasetError(
            f"log10(100 + x) undefined at row {r}, column {c} (x = {d.features[r, c]})"
        )
    return replace(d, features=np.log10(shifted))


def standardize(
    d: Dataset, stats: StandardizationStats | None = None
) -> tuple[Dataset, StandardizationStats]:
    """Z-score features, fitting population mean/std on the train split if needed."""
    if stats is None:
        train = d.features[d.mask(TRAIN)]
        if train.shape[0] == 0:
            raise DatasetError("cannot fit standardization: training split is empty")
        mean = train.mean(axis=0)
        std = train.std(axis=0)
        std = np.where(std < DEGENERATE_STD, 1.0, std)
        stats = StandardizationStats(mean=mean, std=std)
    return replace(d, features=(d.features - stats.mean) / stats.std), stats


def _abs_correlation(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    denom = np.sqrt((xc**2).sum(axis=0) * (yc**2).sum())
    num = np.abs(xc.T @ yc)
    return np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)


# name -> scorer(train_features, train_labels) -> per-column score (higher is better)
RANKERS: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "corr": _abs_correlation,
}


def select_features(d: Dataset, k: int, method: str = "corr") -> tuple[Dataset, np.ndarray]:
    if not 1 <= k <= d.n_features:
        raise DatasetError(f"k must lie in [1, {d.n_features}], got {k}")
    if method not in RANKERS:
        raise DatasetError(f"unknown ranking method {method!r}; have {sorted(RANKERS)}")
    if method == "corr" and d.label_kind != "continuous":
        raise DatasetError("correlation ranking needs continuous labels")
    train = d.mask(TRAIN)
    scores = RANKERS[method](d.features[train], d.labels[train].astype(float))
    # stable sort on -score: equal scores keep ascending column order
    order = np.argsort(-scores, kind="stable")
    keep = np.sort(order[:k])
    names = tuple(d.feature_names[i] for i in keep) if d.feature_names else ()
    return replace(d, features=d.features[:, keep], feature_names=names), keep


def split_fixed(d: Dataset, counts: tuple[int, int, int]) -> Dataset:
    n_train, n_val, n_test = counts
    if min(counts) < 0 or n_train + n_val + n_test != d.n_samples:
        raise DatasetError(
            f"split counts {tuple(counts)} do not sum to {d.n_samples} samples"
        )
    tags = np.array([TRAIN] * n_train + [VALIDATION] * n_val + [TEST] * n_test, dtype="<U10")
    return replace(d, split=tags)


# -- synthesis ---------------------------------------------------------------


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    z = rng.standard_normal((n, spec.n_latent))

    expand = rng.standard_normal((spec.n_latent, spec.n_features)) / np.sqrt(spec.n_latent)
    features = z @ expand + spec.feature_noise * rng.standard_normal((n, spec.n_features))

    if spec.explanation_kind == "continuous":
        emap = rng.standard_normal((spec.n_latent, spec.n_explanations)) / np.sqrt(spec.n_latent)
        expl = z @ emap
        e_basis = expl
    else:
        centers = rng.standard_normal((spec.n_clusters, spec.n_latent))
        dist = ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        expl = np.argmin(dist, axis=1).astype(np.int64)
        e_basis = np.eye(spec.n_clusters)[expl]

    weights = rng.standard_normal(e_basis.shape[1])
    raw = e_basis @ weights
    if spec.label_kind == "continuous":
        raw = raw / max(raw.std(), 1e-12)
        labels = spec.label_offset + spec.label_scale * (
            raw + spec.label_noise * rng.standard_normal(n)
        )
    else:
        raw = raw + spec.label_noise * rng.standard_normal(n)
        edges = np.quantile(raw, np.linspace(0, 1, spec.n_label_classes + 1)[1:-1])
        labels = np.searchsorted(edges, raw, side="right").astype(np.int64)

    d = Dataset(
        features=features,
        labels=labels,
        explanations=expl,
        split=np.full(n, TRAIN, dtype="<U10"),
        feature_names=tuple(f"x{i}" for i in range(spec.n_features)),
        explanation_names=(
            tuple(f"e{i}" for i in range(spec.n_explanations))
            if spec.explanation_kind == "continuous"
            else ("group",)
        ),
        label_kind=spec.label_kind,
        explanation_kind=spec.explanation_kind,
    )
    return split_fixed(d, spec.split) if spec.split is not None else d
