import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tedknn.dataset import (
    Dataset,
    DatasetError,
    Schema,
    StandardizationStats,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    log_transform,
    read_schema,
    save_csv,
    select_features,
    split_fixed,
    standardize,
)
from tedknn.oracle import least_squares_closed_form


def make(features, labels=None, split=None):
    features = np.asarray(features, float)
    n = features.shape[0]
    return Dataset(
        features=features,
        labels=np.arange(n, dtype=float) if labels is None else np.asarray(labels, float),
        explanations=np.zeros((n, 2)),
        split=np.array(split or ["train"] * n, dtype="<U10"),
    )


SCHEMA = Schema(label_column="y", explanation_columns=("e1", "e2"))


def test_load_csv_shapes(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x1,x2,y,e1,e2\n1,2,3,4,5\n6,7,8,9,10\n1e2,-2.5E-1,0,0,0\n")
    d = load_csv(p, SCHEMA)
    assert d.features.shape == (3, 2)
    assert d.labels.shape == (3,)
    assert d.explanations.shape == (3, 2)
    assert d.feature_names == ("x1", "x2")
    assert d.features[2, 1] == -0.25


def test_load_csv_header_only(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x1,y,e1,e2\n")
    with pytest.raises(DatasetError, match="empty dataset"):
        load_csv(p, SCHEMA)


@pytest.mark.parametrize(
    "body, msg",
    [
        ("x1,y,e1\n1,2,3\n", "absent"),
        ("x1,y,e1,e2\n1,2,3\n", "ragged"),
        ("x1,y,e1,e2\n1,abc,3,4\n", "non-numeric"),
    ],
)
def test_load_csv_errors(tmp_path, body, msg):
    p = tmp_path / "d.csv"
    p.write_text(body)
    with pytest.raises(DatasetError, match=msg):
        load_csv(p, SCHEMA)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv", SCHEMA)


def test_wide_file_feature_count(tmp_path):
    n_feat = 4869
    rng = np.random.default_rng(0)
    p = tmp_path / "wide.csv"
    header = ["y", "e1", "e2"] + [f"f{i}" for i in range(n_feat)]
    rows = rng.normal(size=(4, len(header)))
    p.write_text(",".join(header) + "\n" + "\n".join(",".join(map(repr, r.tolist())) for r in rows) + "\n")
    assert load_csv(p, SCHEMA).n_features == n_feat


def test_schema_roundtrip_and_csv_roundtrip(tmp_path):
    d = generate_synthetic(SyntheticSpec(n_samples=20, n_features=4, n_latent=2, n_explanations=3, seed=3))
    schema = save_csv(d, tmp_path / "d.csv")
    (tmp_path / "s.cfg").write_text(
        "label_column = label\nexplanation_columns = e0, e1, e2\nfeature_columns = rest\n"
    )
    back = load_csv(tmp_path / "d.csv", read_schema(tmp_path / "s.cfg"))
    assert schema.explanation_columns == ("e0", "e1", "e2")
    np.testing.assert_array_equal(back.features, d.features)
    np.testing.assert_array_equal(back.labels, d.labels)
    np.testing.assert_array_equal(back.explanations, d.explanations)


@pytest.mark.parametrize("x, expected", [(0.0, 2.0), (900.0, 3.0), (-99.9, -1.0)])
def test_log_transform_values(x, expected):
    out = log_transform(make([[x]]))
    assert out.features[0, 0] == pytest.approx(expected, abs=1e-12)


def test_log_transform_rejects_out_of_domain():
    with pytest.raises(DatasetError):
        log_transform(make([[-100.0]]))


def test_log_transform_leaves_targets():
    d = make([[1.0], [2.0]], labels=[5.0, 6.0])
    out = log_transform(d)
    np.testing.assert_array_equal(out.labels, d.labels)


def test_standardize_column():
    d, stats = standardize(make([[1.0], [2.0], [3.0]]))
    assert stats.mean[0] == 2.0
    assert stats.std[0] == pytest.approx(np.sqrt(2 / 3))
    assert abs(d.features[:, 0].mean()) < 1e-12


def test_standardize_constant_column_maps_to_zero():
    d, stats = standardize(make([[4.0, 1.0], [4.0, 2.0]]))
    assert stats.std[0] == 1.0
    np.testing.assert_array_equal(d.features[:, 0], 0.0)


def test_standardize_uses_train_only():
    d = make([[1.0], [3.0], [100.0]], split=["train", "train", "test"])
    out, stats = standardize(d)
    assert stats.mean[0] == 2.0
    mean_row = make([[2.0]], split=["test"])
    assert standardize(mean_row, stats)[0].features[0, 0] == 0.0


def test_standardize_empty_train():
    with pytest.raises(DatasetError):
        standardize(make([[1.0]], split=["test"]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_standardize_roundtrip(seed):
    rng = np.random.default_rng(seed)
    d = make(rng.normal(5, 3, size=(12, 4)))
    z, stats = standardize(d)
    back, _ = standardize(z, stats.inverse())
    np.testing.assert_allclose(back.features, d.features, atol=1e-9, rtol=0)


def test_select_identity():
    d = make(np.random.default_rng(1).normal(size=(10, 5)))
    out, idx = select_features(d, 5)
    np.testing.assert_array_equal(idx, np.arange(5))
    np.testing.assert_array_equal(out.features, d.features)


def test_select_picks_exact_feature():
    rng = np.random.default_rng(42)
    y = rng.normal(size=60)
    x = rng.normal(size=(60, 6))
    x[:, 0] = y
    # independent check of the premise
    assert abs(np.corrcoef(x[:, 0], y)[0, 1]) == pytest.approx(1.0, abs=1e-12)
    _, idx = select_features(make(x, labels=y), 1)
    assert idx.tolist() == [0]


def test_select_ties_prefer_lower_index():
    x = np.tile(np.arange(5.0)[:, None], (1, 3))
    _, idx = select_features(make(x, labels=np.arange(5.0)), 2)
    assert idx.tolist() == [0, 1]


def test_select_ignores_non_train_rows():
    y = np.array([0.0, 1.0, 2.0, 3.0, 50.0])
    x = np.column_stack([[0.0, 1.0, 2.0, 3.0, -99.0], [0, 0, 1, 0, 50.0]])
    _, idx = select_features(make(x, labels=y, split=["train"] * 4 + ["test"]), 1)
    assert idx.tolist() == [0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_select_idempotent(seed, k):
    rng = np.random.default_rng(seed)
    d = make(rng.normal(size=(15, 6)), labels=rng.normal(size=15))
    once, _ = select_features(d, k)
    twice, idx = select_features(once, k)
    np.testing.assert_array_equal(idx, np.arange(k))
    np.testing.assert_array_equal(twice.features, once.features)


@pytest.mark.parametrize("k", [0, 4])
def test_select_k_out_of_range(k):
    with pytest.raises(DatasetError):
        select_features(make(np.ones((3, 3))), k)


def test_split_fixed_olfactory_counts():
    d = split_fixed(make(np.zeros((476, 1))), (338, 69, 69))
    assert (d.split[:338] == "train").all()
    assert (d.split[338:407] == "validation").all()
    assert (d.split[407:] == "test").all()


def test_split_fixed_all_train_and_mismatch():
    d = make(np.zeros((2, 1)))
    assert (split_fixed(d, (2, 0, 0)).split == "train").all()
    with pytest.raises(DatasetError):
        split_fixed(d, (1, 1, 1))


def test_synthetic_determinism():
    spec = SyntheticSpec(n_samples=50, seed=11)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    for f in ("features", "labels", "explanations"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()


def test_synthetic_noise_free_labels_are_linear_in_explanations():
    d = generate_synthetic(SyntheticSpec(n_samples=200, label_noise=0.0, seed=5))
    design = np.column_stack([np.ones(d.n_samples), d.explanations])
    w = least_squares_closed_form(design, d.labels)
    assert np.abs(design @ w - d.labels).max() < 1e-9


def test_synthetic_categorical_explanations():
    d = generate_synthetic(SyntheticSpec(n_samples=300, explanation_kind="categorical", n_clusters=3, seed=2))
    assert set(np.unique(d.explanations)) <= {0, 1, 2}
    assert d.explanations.dtype.kind == "i"


def test_synthetic_invalid_spec():
    with pytest.raises(DatasetError):
        generate_synthetic(SyntheticSpec(n_features=3, n_latent=5))
    with pytest.raises(DatasetError):
        generate_synthetic(SyntheticSpec(label_noise=-1))


def test_dataset_alignment_enforced():
    with pytest.raises(DatasetError):
        Dataset(np.zeros((3, 2)), np.zeros(2), np.zeros((3, 1)), np.array(["train"] * 3))
