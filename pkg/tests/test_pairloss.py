import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from tedknn.network import DenseLayer, Network, TrainConfig, embed, flatten_params
from tedknn.oracle import finite_difference_grad, relative_error
from tedknn.pairloss import (
    LossParams,
    NeighborSpec,
    PairBatch,
    PairSamplingError,
    Relation,
    batch_pair_loss,
    cosine_similarity,
    loss_combined,
    loss_xe,
    loss_xy,
    relation_categorical,
    relation_continuous,
    sample_pairs,
    train_pairwise,
)

N, F, X = Relation.NEIGHBOR, Relation.NON_NEIGHBOR, Relation.EXCLUDED
vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


def test_cosine_basic():
    a = np.array([1.0, 2.0, -0.5])
    assert cosine_similarity(a, a) == pytest.approx(1.0)
    assert cosine_similarity([1.0, 0.0], [0.0, 3.0]) == 0.0
    assert cosine_similarity(a, -a) == pytest.approx(-1.0)


def test_cosine_zero_norm(caplog):
    assert cosine_similarity([0.0, 0.0], [1.0, 2.0]) == 0.0
    assert "zero-norm" in caplog.text


@settings(max_examples=100, deadline=None)
@given(vec, vec)
def test_cosine_in_range(a, b):
    assert -1.0 <= cosine_similarity(a, b) <= 1.0


def test_relation_continuous():
    assert relation_continuous([3.0], [3.0], 0.0, 1.0) == N
    assert relation_continuous([0.0], [15.0], 10, 20) == X
    assert relation_continuous([0.0], [0.03], 0.0272, 0.0272) == F
    assert relation_continuous([0.0, 0.0], [5.0, 5.0], 10, 20) == N  # l1 = 10
    with pytest.raises(ValueError):
        relation_continuous([0.0], [0.0, 1.0], 1, 2)


def test_relation_categorical():
    assert relation_categorical(0, 0, 4, 4, "E") == N
    assert relation_categorical(1, 1, 4, 5, "E") == X
    assert relation_categorical(0, 1, 4, 5, "E") == F
    assert relation_categorical(0, 0, 4, 5, "Y") == N
    assert relation_categorical(0, 2, 4, 4, "Y") == F


def test_loss_values():
    f = np.array([0.3, -1.0, 2.0])
    assert loss_xy(f, f, N, 0.25) == 0.0
    assert loss_xy(f, f, F, 0.25) == pytest.approx(0.75, abs=1e-12)
    a, b = np.array([1.0, 0.0]), np.array([0.1, np.sqrt(1 - 0.01)])
    assert cosine_similarity(a, b) == pytest.approx(0.1)
    assert loss_xy(a, b, F, 0.25) == 0.0
    assert loss_xy(a, b, X, 0.25) == 0.0
    assert loss_xe(f, f, N, 0.5) == 0.0
    assert loss_xe(f, f, F, 0.5) == pytest.approx(0.5)
    assert loss_xe(a, b, F, 0.5) == 0.0


def test_loss_combined():
    rng = np.random.default_rng(0)
    f_a, f_b = rng.normal(size=3), rng.normal(size=3)
    p = LossParams(0.25, 0.25, 1.0)
    assert loss_combined(f_a, f_b, F, N, p) == loss_xy(f_a, f_b, F, 0.25) + loss_xe(f_a, f_b, N, 0.25)
    assert loss_combined(f_a, f_a, N, N, p) == pytest.approx(0.0, abs=1e-15)
    assert loss_combined(f_a, f_b, N, F, LossParams(w=0.0)) == loss_xy(f_a, f_b, N, 0.25)
    assert loss_combined(f_a, f_b, F, X, p) == loss_xy(f_a, f_b, F, 0.25)


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.sampled_from([N, F, X]), st.sampled_from([N, F, X]), st.floats(0, 1), st.floats(0.01, 100))
def test_loss_properties(a, b, ry, re_, m, scale):
    assume(np.linalg.norm(a) > 1e-3 and np.linalg.norm(b) > 1e-3)
    p = LossParams(m, m, 0.5)
    v = loss_combined(a, b, ry, re_, p)
    assert v >= 0
    assert v == pytest.approx(loss_combined(b, a, ry, re_, p), abs=1e-12)
    assert v == pytest.approx(loss_combined(scale * a, b, ry, re_, p), abs=1e-9)
    c = cosine_similarity(a, b)
    if ry == F:
        assert (loss_xy(a, b, F, m) == 0) == (c <= m)


def test_relations_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(100):
        ya, yb = rng.integers(0, 3, 2)
        ea, eb = rng.integers(0, 4, 2)
        for s in "YE":
            assert relation_categorical(ya, yb, ea, eb, s) == relation_categorical(yb, ya, eb, ea, s)
        u, v = rng.normal(size=2), rng.normal(size=2)
        assert relation_continuous(u, v, 0.5, 1.5) == relation_continuous(v, u, 0.5, 1.5)


@pytest.mark.parametrize("mode", ["Y", "E", "YE"])
def test_batch_gradient_wrt_embeddings(mode):
    rng = np.random.default_rng(7)
    n, d = 8, 5
    p = LossParams(0.2, 0.3, 0.7)
    fa, fb = rng.normal(size=(n, d)), rng.normal(size=(n, d))
    cos = (fa * fb).sum(1) / np.linalg.norm(fa, axis=1) / np.linalg.norm(fb, axis=1)
    assert np.abs(cos - 0.2).min() > 1e-3 and np.abs(cos - 0.3).min() > 1e-3
    ry = rng.choice([1, 2, 0], n)
    re_ = rng.choice([1, 2, 0], n)
    _, ga, gb = batch_pair_loss(fa, fb, ry, re_, p, mode)

    def direct(flat):
        A, B = flat[: n * d].reshape(n, d), flat[n * d :].reshape(n, d)
        w = {"Y": (1, 0), "E": (0, 1), "YE": (1, p.w)}[mode]
        tot = 0.0
        for i in range(n):
            tot += w[0] * loss_xy(A[i], B[i], Relation(ry[i]), p.m1) + w[1] * loss_xe(A[i], B[i], Relation(re_[i]), p.m2)
        return tot / n

    num = finite_difference_grad(direct, np.concatenate([fa.ravel(), fb.ravel()]))
    assert relative_error(np.concatenate([ga.ravel(), gb.ravel()]), num).max() < 1e-4


def test_batch_loss_matches_scalar_losses():
    rng = np.random.default_rng(1)
    p = LossParams(0.25, 0.4, 0.0)
    fa, fb = rng.normal(size=(50, 4)), rng.normal(size=(50, 4))
    ry, re_ = rng.choice([0, 1, 2], 50), rng.choice([0, 1, 2], 50)
    v, _, _ = batch_pair_loss(fa, fb, ry, re_, p, "YE")
    vy, _, _ = batch_pair_loss(fa, fb, ry, re_, p, "Y")
    ref = np.mean([loss_xy(fa[i], fb[i], Relation(ry[i]), 0.25) for i in range(50)])
    assert v == vy
    assert v == pytest.approx(ref, abs=1e-12)


def test_zero_norm_embedding_in_batch():
    fa = np.array([[0.0, 0.0], [1.0, 0.0]])
    fb = np.array([[1.0, 1.0], [1.0, 0.0]])
    v, ga, gb = batch_pair_loss(fa, fb, np.array([1, 1]), np.array([0, 0]), LossParams(), "Y")
    assert v == pytest.approx(0.5)  # (1 - 0) and (1 - 1), averaged
    assert np.all(np.isfinite(ga)) and not ga[0].any()


def test_sample_pairs_count_and_determinism():
    rng = np.random.default_rng(0)
    y = rng.uniform(0, 100, 338)
    e = rng.uniform(0, 100, (338, 19))
    spec = NeighborSpec("continuous", 10, 20, 0.0272, 0.0272)
    a = sample_pairs(y, e, spec, 100_000, seed=5)
    b = sample_pairs(y, e, spec, 100_000, seed=5)
    assert len(a) == 100_000
    assert np.all(a.a != a.b)
    assert a.a.max() < 338 and a.b.max() < 338
    for f in ("a", "b", "rel_y", "rel_e"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
    assert not np.any((a.rel_y == X) & (a.rel_e == X))


def test_sample_pairs_relations_match_scalar_rules():
    rng = np.random.default_rng(2)
    y = rng.uniform(0, 10, 40)
    e = rng.uniform(0, 1, (40, 3))
    spec = NeighborSpec("continuous", 2, 4, 0.5, 1.0)
    pb = sample_pairs(y, e, spec, 500, seed=1, mode="Y")
    for a, b, ry, re_ in zip(pb.a, pb.b, pb.rel_y, pb.rel_e):
        assert ry == relation_continuous(y[a], y[b], 2, 4)
        assert re_ == relation_continuous(e[a], e[b], 0.5, 1.0)
        assert ry != X


def test_sample_pairs_categorical():
    y = np.array([0, 0, 1, 1, 2])
    e = np.array([0, 1, 2, 2, 3])
    pb = sample_pairs(y, e, NeighborSpec("categorical"), 300, seed=0, mode="E")
    for a, b, ry, re_ in zip(pb.a, pb.b, pb.rel_y, pb.rel_e):
        assert re_ == relation_categorical(y[a], y[b], e[a], e[b], "E") != X
        assert ry == relation_categorical(y[a], y[b], e[a], e[b], "Y")


def test_sample_pairs_identical_labels_all_neighbors():
    pb = sample_pairs(np.array([1.0, 1.0]), None, NeighborSpec("continuous", 0, 1), 10, mode="Y")
    assert np.all(pb.rel_y == N)


def test_sample_pairs_all_excluded_errors():
    y = np.array([0.0, 5.0, 10.0])
    with pytest.raises(PairSamplingError):
        sample_pairs(y, None, NeighborSpec("continuous", 1, 100), 10, mode="Y")


def test_sample_pairs_balanced():
    y = np.arange(100.0)
    pb = sample_pairs(y, None, NeighborSpec("continuous", 3, 3), 200, seed=0, mode="Y", balance=True)
    assert (pb.rel_y == N).sum() == 100 and (pb.rel_y == F).sum() == 100


def test_pair_batch_file_roundtrip(tmp_path):
    y = np.random.default_rng(0).uniform(0, 10, 20)
    pb = sample_pairs(y, y[:, None], NeighborSpec("continuous", 1, 3, 1, 3), 50, seed=4)
    pb.save(tmp_path / "p.txt")
    back = PairBatch.load(tmp_path / "p.txt")
    assert back.seed == 4
    for f in ("a", "b", "rel_y", "rel_e"):
        np.testing.assert_array_equal(getattr(back, f), getattr(pb, f))


def _one_layer(w):
    return Network((DenseLayer(np.asarray(w, float), np.zeros(2)),), {})


def test_train_pairwise_pulls_neighbors_together():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    pairs = PairBatch(np.array([0]), np.array([1]), np.array([1]), np.array([0]))
    net = _one_layer([[1.0, 0.2], [0.1, 1.0]])
    before = cosine_similarity(*embed(net, x))
    out = train_pairwise(net, x, pairs, LossParams(), TrainConfig(epochs=3000, batch_size=1, learning_rate=0.5), "Y")
    after = cosine_similarity(*embed(out, x))
    assert before < 0.5 and after >= 0.999


def test_train_pairwise_modes_and_frozen():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(12, 3))
    y = rng.uniform(0, 10, 12)
    e = rng.uniform(0, 1, (12, 2))
    pairs = sample_pairs(y, e, NeighborSpec("continuous", 2, 5, 0.3, 0.6), 40, seed=2)
    net = Network(
        (DenseLayer(rng.normal(size=(4, 3)), np.zeros(4)),),
        {"y": (DenseLayer(rng.normal(size=(1, 4)), np.zeros(1)),)},
    )
    cfg = TrainConfig(epochs=3, batch_size=8, learning_rate=0.1)
    y_only = train_pairwise(net, x, pairs, LossParams(w=0.9), cfg, "Y")
    w0 = train_pairwise(net, x, pairs, LossParams(w=0.0), cfg, "YE")
    assert flatten_params(y_only).tobytes() == flatten_params(w0).tobytes()
    np.testing.assert_array_equal(y_only.heads["y"][0].weights, net.heads["y"][0].weights)
    frozen = train_pairwise(net, x, pairs, LossParams(), TrainConfig(epochs=2, learning_rate=0.0), "YE")
    assert flatten_params(frozen).tobytes() == flatten_params(net).tobytes()


@pytest.mark.parametrize("kwargs", [{"c1": 2, "c2": 1}, {"c3": -1}])
def test_neighbor_spec_validation(kwargs):
    with pytest.raises(ValueError):
        NeighborSpec("continuous", **kwargs)


def test_loss_params_validation():
    with pytest.raises(ValueError):
        LossParams(m1=1.5)
    with pytest.raises(ValueError):
        LossParams(w=-0.1)
