"""Exact k-nearest-neighbor inference in embedding space with Gaussian weights."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

METRICS = ("cosine", "euclidean")
BANDWIDTH_FLOOR = 1e-12
DEFAULT_K_LIST = (1, 2, 5, 10, 15, 20)


@dataclass(frozen=True)
class NeighborIndex:
    """Brute-force index over stored training embeddings.

    ``bandwidth`` is either ``"median"`` (per query: median retrieved
    distance) or a fixed positive float.
    """

    embeddings: np.ndarray
    y_values: np.ndarray
    e_values: np.ndarray | None
    metric: str = "euclidean"
    bandwidth: str | float = "median"

    def __len__(self):
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def save(self, path: str | Path) -> None:
        arrays = {"embeddings": self.embeddings, "y_values": self.y_values}
        if self.e_values is not None:
            arrays["e_values"] = self.e_values
        arrays["metric"] = np.array(self.metric)
        arrays["bandwidth"] = np.array(str(self.bandwidth))
        with Path(path).open("wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "NeighborIndex":
        with np.load(Path(path)) as data:
            bw = str(data["bandwidth"])
            return cls(
                data["embeddings"].copy(),
                data["y_values"].copy(),
                data["e_values"].copy() if "e_values" in data else None,
                str(data["metric"]),
                bw if bw == "median" else float(bw),
            )


@dataclass(frozen=True)
class Neighborhood:
    indices: np.ndarray
    distances: np.ndarray
    weights: np.ndarray


def build_index(embeddings, y_values, e_values=None, metric="euclidean", bandwidth="median"):
    embeddings = np.asarray(embeddings, float)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0 or embeddings.shape[1] == 0:
        raise ValueError("need a non-empty (n_train, d) embedding matrix")
    n = embeddings.shape[0]
    y_values = np.asarray(y_values)
    if y_values.shape[0] != n or (e_values is not None and np.asarray(e_values).shape[0] != n):
        raise ValueError("embeddings and stored values have different row counts")
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if bandwidth != "median" and not float(bandwidth) > 0:
        raise ValueError("bandwidth must be 'median' or a positive number")
    return NeighborIndex(
        embeddings, y_values, None if e_values is None else np.asarray(e_values), metric, bandwidth
    )


def _distances(index: NeighborIndex, f: np.ndarray) -> np.ndarray:
    if index.metric == "euclidean":
        return np.sqrt(((index.embeddings - f) ** 2).sum(axis=1))
    # row-wise sums (not a BLAS matmul) so identical rows get identical distances
    norms = np.sqrt((index.embeddings**2).sum(axis=1) * (f @ f))
    dots = (index.embeddings * f).sum(axis=1)
    cos = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    return 1.0 - np.clip(cos, -1.0, 1.0)


def gaussian_weights(distances, bandwidth: float) -> np.ndarray:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    d = np.asarray(distances, float)
    raw = np.exp(-(d**2) / (2.0 * bandwidth**2))
    total = raw.sum()
    if total == 0:
        return np.full(d.shape, 1.0 / d.size)
    return raw / total


def query(index: NeighborIndex, f, k: int) -> Neighborhood:
    f = np.asarray(f, float)
    if k < 1:
        raise ValueError("k must be >= 1")
    if f.shape != (index.dim,):
        raise ValueError(f"query has shape {f.shape}, index dimension is {index.dim}")
    dist = _distances(index, f)
    k = min(k, len(index))
    # stable sort: equal distances keep the lower training row first
    order = np.argsort(dist, kind="stable")[:k]
    dk = dist[order]
    if index.bandwidth == "median":
        sigma = max(float(np.median(dk)), BANDWIDTH_FLOOR)
    else:
        sigma = float(index.bandwidth)
    return Neighborhood(order, dk, gaussian_weights(dk, sigma))


def predict_continuous(nbhd: Neighborhood, values) -> np.ndarray:
    values = np.asarray(values, float)
    if nbhd.indices.size and nbhd.indices.max() >= values.shape[0]:
        raise ValueError("neighbor indices exceed the stored value rows")
    picked = values[nbhd.indices]
    return np.tensordot(nbhd.weights, picked, axes=(0, 0))


def predict_categorical(nbhd: Neighborhood, classes, n_classes: int, vote="kernel") -> int:
    """Class with the largest summed weight (``vote="majority"`` counts heads)."""
    classes = np.asarray(classes)
    if nbhd.indices.size and nbhd.indices.max() >= classes.shape[0]:
        raise ValueError("neighbor indices exceed the stored class rows")
    picked = classes[nbhd.indices].astype(np.int64)
    if picked.size and picked.max() >= n_classes:
        raise ValueError("stored class index out of range")
    if vote == "kernel":
        w = nbhd.weights
    elif vote == "majority":
        w = np.ones(len(picked))
    else:
        raise ValueError(f"vote must be 'kernel' or 'majority', got {vote!r}")
    totals = np.bincount(picked, weights=w, minlength=n_classes)
    return int(np.argmax(totals))  # first maximum = lowest class index


def predict_batch(index: NeighborIndex, queries, k: int, vote="kernel", n_classes=(0, 0)):
    """kNN predictions of the stored Y and E for every query row.

    ``n_classes`` gives (Y classes, E classes); 0 marks a continuous space.
    """
    queries = np.asarray(queries, float)
    y_out, e_out = [], []
    for f in queries:
        nb = query(index, f, k)
        if n_classes[0]:
            y_out.append(predict_categorical(nb, index.y_values, n_classes[0], vote))
        else:
            y_out.append(predict_continuous(nb, index.y_values))
        if index.e_values is not None:
            if n_classes[1]:
                e_out.append(predict_categorical(nb, index.e_values, n_classes[1], vote))
            else:
                e_out.append(predict_continuous(nb, index.e_values))
    y_arr = np.array(y_out)
    e_arr = np.array(e_out) if index.e_values is not None else None
    return y_arr, e_arr
