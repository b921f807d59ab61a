"""Pairwise cosine-embedding losses, neighbor rules and pair sampling."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import Network, TrainConfig, optimize

log = logging.getLogger(__name__)

MODES = ("Y", "E", "YE")


class Relation(enum.IntEnum):
    EXCLUDED = 0
    NEIGHBOR = 1
    NON_NEIGHBOR = 2


_REL_CODES = {Relation.NEIGHBOR: "N", Relation.NON_NEIGHBOR: "F", Relation.EXCLUDED: "X"}


class PairSamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class NeighborSpec:
    """Which pairs count as neighbors in Y- and E-space.

    For ``kind="continuous"`` a pair is a neighbor when the l1 distance is at
    most the low threshold, a non-neighbor above the high threshold and
    excluded in between. ``kind="categorical"`` uses class equality instead.
    """

    kind: str = "continuous"
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    c4: float = 0.0

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise ValueError(f"unknown neighbor kind {self.kind!r}")
        if self.kind == "continuous":
            if not (0 <= self.c1 <= self.c2 and 0 <= self.c3 <= self.c4):
                raise ValueError("need 0 <= c1 <= c2 and 0 <= c3 <= c4")


@dataclass(frozen=True)
class LossParams:
    m1: float = 0.25
    m2: float = 0.25
    w: float = 1.0

    def __post_init__(self):
        if not (0 <= self.m1 <= 1 and 0 <= self.m2 <= 1):
            raise ValueError("margins must lie in [0, 1]")
        if self.w < 0:
            raise ValueError("w must be non-negative")


@dataclass(frozen=True)
class PairBatch:
    a: np.ndarray
    b: np.ndarray
    rel_y: np.ndarray
    rel_e: np.ndarray
    seed: int = 0

    def __len__(self):
        return len(self.a)

    def save(self, path: str | Path) -> None:
        with Path(path).open("w") as fh:
            fh.write(f"# seed {self.seed}\n")
            for a, b, ry, re_ in zip(self.a, self.b, self.rel_y, self.rel_e):
                fh.write(f"{a} {b} {_REL_CODES[Relation(ry)]} {_REL_CODES[Relation(re_)]}\n")

    @classmethod
    def load(cls, path: str | Path) -> "PairBatch":
        decode = {v: int(k) for k, v in _REL_CODES.items()}
        seed, rows = 0, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("# seed"):
                seed = int(line.split()[-1])
            elif line.strip():
                a, b, ry, re_ = line.split()
                rows.append((int(a), int(b), decode[ry], decode[re_]))
        arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], seed)


# -- similarity & relations --------------------------------------------------


def cosine_similarity(f_a, f_b) -> float:
    f_a, f_b = np.asarray(f_a, float), np.asarray(f_b, float)
    if f_a.shape != f_b.shape:
        raise ValueError("vectors must have equal length")
    na2, nb2 = f_a @ f_a, f_b @ f_b
    if na2 == 0 or nb2 == 0:
        log.warning("cosine similarity of a zero-norm vector; using 0")
        return 0.0
    # sqrt of the product of squared norms makes cos(f, f) exactly 1
    return float(np.clip(f_a @ f_b / np.sqrt(na2 * nb2), -1.0, 1.0))


def relation_continuous(y_a, y_b, c_lo: float, c_hi: float) -> Relation:
    y_a, y_b = np.atleast_1d(np.asarray(y_a, float)), np.atleast_1d(np.asarray(y_b, float))
    if y_a.shape != y_b.shape:
        raise ValueError("vectors must have equal length")
    if c_hi < c_lo:
        raise ValueError("c_hi must be >= c_lo")
    d = np.abs(y_a - y_b).sum()
    if d <= c_lo:
        return Relation.NEIGHBOR
    if d > c_hi:
        return Relation.NON_NEIGHBOR
    return Relation.EXCLUDED


def relation_categorical(y_a: int, y_b: int, e_a: int, e_b: int, space: str) -> Relation:
    if min(y_a, y_b, e_a, e_b) < 0:
        raise ValueError("class indices must be non-negative")
    if space == "Y":
        return Relation.NEIGHBOR if y_a == y_b else Relation.NON_NEIGHBOR
    if space == "E":
        if e_a == e_b:
            return Relation.NEIGHBOR
        return Relation.NON_NEIGHBOR if y_a != y_b else Relation.EXCLUDED
    raise ValueError(f"space must be 'Y' or 'E', got {space!r}")


def _l1(values, a, b):
    diff = np.abs(values[a] - values[b])
    return diff.reshape(len(a), -1).sum(axis=1)


def _relations(y, e, spec: NeighborSpec, a, b):
    """Vectorized Y- and E-space relations for index arrays ``a``, ``b``."""
    if spec.kind == "continuous":
        def rel(d, lo, hi):
            out = np.full(d.shape, int(Relation.EXCLUDED))
            out[d <= lo] = Relation.NEIGHBOR
            out[d > hi] = Relation.NON_NEIGHBOR
            return out

        ry = rel(_l1(y, a, b), spec.c1, spec.c2)
        re_ = rel(_l1(e, a, b), spec.c3, spec.c4) if e is not None else np.zeros_like(ry)
        return ry, re_
    same_y = y[a] == y[b]
    ry = np.where(same_y, int(Relation.NEIGHBOR), int(Relation.NON_NEIGHBOR))
    if e is None:
        return ry, np.zeros_like(ry)
    re_ = np.where(
        e[a] == e[b],
        int(Relation.NEIGHBOR),
        np.where(same_y, int(Relation.EXCLUDED), int(Relation.NON_NEIGHBOR)),
    )
    return ry, re_


# -- losses ------------------------------------------------------------------


def _pair_loss(cos, rel, m):
    if rel == Relation.NEIGHBOR:
        return 1.0 - cos
    if rel == Relation.NON_NEIGHBOR:
        return max(cos - m, 0.0)
    return 0.0


def loss_xy(f_a, f_b, rel: Relation, m: float) -> float:
    return _pair_loss(cosine_similarity(f_a, f_b), rel, m)


def loss_xe(f_a, f_b, rel: Relation, m: float) -> float:
    return _pair_loss(cosine_similarity(f_a, f_b), rel, m)


def loss_combined(f_a, f_b, rel_y: Relation, rel_e: Relation, params: LossParams) -> float:
    cos = cosine_similarity(f_a, f_b)
    return _pair_loss(cos, rel_y, params.m1) + params.w * _pair_loss(cos, rel_e, params.m2)


def _mode_weights(mode: str, params: LossParams) -> tuple[float, float]:
    if mode == "Y":
        return 1.0, 0.0
    if mode == "E":
        return 0.0, 1.0
    if mode == "YE":
        return 1.0, params.w
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def batch_pair_loss(f_a, f_b, rel_y, rel_e, params: LossParams, mode="YE"):
    """Mean pairwise loss over rows of ``f_a``/``f_b`` and its gradients.

    Returns ``(value, d_f_a, d_f_b)``. Zero-norm rows get similarity 0 and
    zero gradient.
    """
    wy, we = _mode_weights(mode, params)
    n = f_a.shape[0]
    na2 = (f_a * f_a).sum(axis=1)
    nb2 = (f_b * f_b).sum(axis=1)
    ok = (na2 > 0) & (nb2 > 0)
    if not ok.all():
        log.warning("%d pair(s) with zero-norm embeddings; similarity set to 0", (~ok).sum())
    na2, nb2 = np.where(ok, na2, 1.0), np.where(ok, nb2, 1.0)
    na_s, nb_s = np.sqrt(na2), np.sqrt(nb2)
    # sqrt of the product of squared norms makes cos(f, f) exactly 1
    cos = np.where(ok, (f_a * f_b).sum(axis=1) / np.sqrt(na2 * nb2), 0.0)
    cos = np.clip(cos, -1.0, 1.0)

    def term(rel, m):
        neighbor = rel == Relation.NEIGHBOR
        active = (rel == Relation.NON_NEIGHBOR) & (cos > m)
        value = np.where(neighbor, 1.0 - cos, 0.0) + np.where(active, cos - m, 0.0)
        dcos = np.where(neighbor, -1.0, 0.0) + np.where(active, 1.0, 0.0)
        return value, dcos

    value = np.zeros(n)
    dcos = np.zeros(n)
    if wy:
        v, d = term(rel_y, params.m1)
        value += wy * v
        dcos += wy * d
    if we:
        v, d = term(rel_e, params.m2)
        value += we * v
        dcos += we * d
    dcos = np.where(ok, dcos, 0.0) / n
    # d cos / d f_a = f_b / (|a||b|) - cos * f_a / |a|^2
    ga = f_b / (na_s * nb_s)[:, None] - (cos / na_s**2)[:, None] * f_a
    gb = f_a / (na_s * nb_s)[:, None] - (cos / nb_s**2)[:, None] * f_b
    return float(value.mean()), dcos[:, None] * ga, dcos[:, None] * gb


@dataclass
class PairwiseLoss:
    """Network loss over pairs whose rows are stacked ``[a rows; b rows]``."""

    rel_y: np.ndarray
    rel_e: np.ndarray
    params: LossParams
    mode: str = "YE"

    def __call__(self, emb, outputs):
        n = len(self.rel_y)
        value, ga, gb = batch_pair_loss(
            emb[:n], emb[n:], self.rel_y, self.rel_e, self.params, self.mode
        )
        return value, np.vstack([ga, gb]), {}


# -- sampling & training -------------------------------------------------------


def _spaces(mode):
    return {"Y": ("Y",), "E": ("E",), "YE": ("Y", "E")}[mode]


def sample_pairs(
    labels: np.ndarray,
    explanations: np.ndarray | None,
    spec: NeighborSpec,
    n_pairs: int,
    seed: int = 0,
    mode: str = "YE",
    balance: bool = False,
    chunk: int = 4096,
) -> PairBatch:
    """Uniformly sample ordered training pairs ``a != b`` with rejection.

    A pair is dropped when it is excluded in every space ``mode`` trains on.
    With ``balance=True`` half the pairs are neighbors in the first of those
    spaces and half are non-neighbors. Gives up after ``100 * n_pairs`` draws.
    """
    n = len(labels)
    if n < 2:
        raise PairSamplingError("need at least two training samples to form pairs")
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    if "E" in _spaces(mode) and explanations is None:
        raise ValueError(f"mode {mode!r} needs explanations")
    rng = np.random.default_rng(seed)
    cap = 100 * n_pairs
    primary = 0 if _spaces(mode)[0] == "Y" else 1
    quota = {int(Relation.NEIGHBOR): n_pairs // 2, int(Relation.NON_NEIGHBOR): n_pairs - n_pairs // 2}
    kept: list[np.ndarray] = []
    n_kept = draws = 0
    while n_kept < n_pairs and draws < cap:
        m = min(chunk, cap - draws)
        a = rng.integers(0, n, m)
        b = rng.integers(0, n - 1, m)
        b = b + (b >= a)  # uniform over b != a
        draws += m
        ry, re_ = _relations(labels, explanations, spec, a, b)
        rels = np.stack([ry, re_])
        useful = np.zeros(m, dtype=bool)
        for s in _spaces(mode):
            useful |= rels[0 if s == "Y" else 1] != Relation.EXCLUDED
        block = np.stack([a, b, ry, re_], axis=1)[useful]
        if balance:
            picked = []
            for row in block:
                key = int(row[2 + primary])
                if quota.get(key, 0) > 0:
                    quota[key] -= 1
                    picked.append(row)
            block = np.array(picked, dtype=np.int64).reshape(-1, 4)
        kept.append(block[: n_pairs - n_kept])
        n_kept += len(kept[-1])
    if n_kept < n_pairs:
        raise PairSamplingError(
            f"only {n_kept} of {n_pairs} usable pairs after {draws} draws; "
            "the neighbor spec excludes (almost) every pair"
        )
    arr = np.concatenate(kept)
    return PairBatch(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], seed)


def train_pairwise(
    net: Network,
    x: np.ndarray,
    pairs: PairBatch,
    params: LossParams,
    config: TrainConfig,
    mode: str = "YE",
) -> Network:
    """Minimize the mean pairwise loss through the trunk; heads stay fixed.

    ``x`` holds the training inputs that ``pairs`` indexes into. Mini-batches
    are drawn over pairs.
    """
    _mode_weights(mode, params)
    x = np.asarray(x, float)

    def batch(idx):
        rows = np.concatenate([pairs.a[idx], pairs.b[idx]])
        return x[rows], PairwiseLoss(pairs.rel_y[idx], pairs.rel_e[idx], params, mode)

    return optimize(net, len(pairs), batch, config, trainable=lambda name: name.startswith("trunk."))
