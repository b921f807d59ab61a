"""Brute-force reference computations used to check the main modules.

Nothing here imports from the rest of the package; the arithmetic is
duplicated on purpose so a bug in one place cannot hide in both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class OracleTolerance:
    rel_grad: float = 1e-4
    abs_pred: float = 1e-9
    fd_step: float = 1e-5

    def __post_init__(self):
        if min(self.rel_grad, self.abs_pred, self.fd_step) <= 0:
            raise ValueError("tolerances must be positive")


def _euclidean(p, q):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))


def _cosine_distance(p, q):
    dot = sum(a * b for a, b in zip(p, q))
    norm = math.sqrt(sum(a * a for a in p)) * math.sqrt(sum(b * b for b in q))
    if norm == 0:
        return 1.0
    return 1.0 - min(1.0, max(-1.0, dot / norm))


def knn_exhaustive(points, query, k: int, metric: str = "euclidean"):
    """Distances to every point, fully sorted; ties go to the lower index."""
    points = [list(map(float, p)) for p in np.asarray(points)]
    query = list(map(float, np.asarray(query)))
    if any(len(p) != len(query) for p in points):
        raise ValueError("dimension mismatch")
    if not 1 <= k <= len(points):
        raise ValueError("need 1 <= k <= n")
    dist = _euclidean if metric == "euclidean" else _cosine_distance
    scored = sorted((dist(p, query), i) for i, p in enumerate(points))[:k]
    return [i for _, i in scored], [d for d, _ in scored]


def finite_difference_grad(
    fn: Callable[[np.ndarray], float], params, step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of ``fn`` at ``params``."""
    p = np.array(params, dtype=float)
    grad = np.empty_like(p)
    for i in range(p.size):
        orig = p.flat[i]
        p.flat[i] = orig + step
        up = fn(p)
        p.flat[i] = orig - step
        down = fn(p)
        p.flat[i] = orig
        if not (math.isfinite(up) and math.isfinite(down)):
            raise FloatingPointError(f"non-finite loss while perturbing parameter {i}")
        grad.flat[i] = (up - down) / (2 * step)
    return grad


def least_squares_closed_form(X, y) -> np.ndarray:
    """Normal-equation solution; adds 1e-9 * I when X^T X is singular."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    gram = X.T @ X
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        gram = gram + 1e-9 * np.eye(gram.shape[0])
    return np.linalg.solve(gram, X.T @ y)


def relative_error(analytic, numeric, floor: float = 1e-6) -> np.ndarray:
    """Element-wise ``|a - n| / max(|a|, |n|, floor)``."""
    a, n = np.asarray(analytic, float), np.asarray(numeric, float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
