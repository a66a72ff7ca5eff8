import numpy as np
import pytest
from hypothesis import given, strategies as st

from evidential import datasets as ds


def test_clusters_deterministic_and_separable():
    a = ds.gen_gaussian_clusters(seed=4)
    b = ds.gen_gaussian_clusters(seed=4)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.features, ds.gen_gaussian_clusters(seed=5).features)
    far = ds.gen_gaussian_clusters(centers=[[0, 0], [40, 0], [0, 40]], seed=1)
    cents = np.stack([far.features[far.labels == k].mean(0) for k in range(3)])
    pred = np.argmin(((far.features[:, None] - cents[None]) ** 2).sum(-1), axis=1)
    assert np.mean(pred == far.labels) == 1.0


def test_cluster_means_within_three_standard_errors():
    centers = np.array([[1.0, -2.0], [6.0, 3.0], [-4.0, 5.0]])
    n, scale = 400, 1.7
    d = ds.gen_gaussian_clusters(3, n, centers, scale, seed=11)
    for k in range(3):
        m = d.features[d.labels == k].mean(0)
        assert np.all(np.abs(m - centers[k]) <= 3 * scale / np.sqrt(n))


def test_clusters_errors_and_splits():
    with pytest.raises(ValueError):
        ds.gen_gaussian_clusters(K=1)
    with pytest.raises(ValueError):
        ds.gen_gaussian_clusters(K=3, centers=[[0, 0], [1, 1]])
    d = ds.gen_gaussian_clusters(n_per_class=50, test_frac=0.2, seed=2)
    assert d.mask("test").sum() == 30 and d.mask("train").sum() == 120


def test_spirals():
    d = ds.gen_spirals(n=301, noise=0.0, seed=3)
    counts = np.bincount(d.labels)
    assert counts.max() - counts.min() <= 1
    for k in range(2):
        r = np.linalg.norm(d.features[d.labels == k], axis=1)
        assert np.all(np.diff(r) > 0)
    assert np.array_equal(ds.gen_spirals(seed=9).features, ds.gen_spirals(seed=9).features)
    three = ds.gen_spirals(n=100, arms=3)
    assert np.bincount(three.labels).tolist() == [34, 33, 33]


def test_poly_regression():
    d = ds.gen_poly_regression(noise_sd=0.0, n=200, seed=1)
    x = d.features[:, 0]
    np.testing.assert_allclose(d.labels, x**3, rtol=1e-14)
    xo = d.subset("ood")[0][:, 0]
    assert xo.size == 50 and np.all((xo < -4) | (xo > 4))
    assert np.all(np.abs(xo) <= 6)
    xi = d.subset("train")[0][:, 0]
    assert np.all((xi >= -4) & (xi <= 4))
    e = ds.gen_poly_regression(seed=1)
    assert np.array_equal(e.labels, ds.gen_poly_regression(seed=1).labels)


def test_iris_shape_and_composition():
    d = ds.load_iris()
    assert d.features.shape == (150, 4)
    assert np.bincount(d.labels).tolist() == [50, 50, 50]
    assert d.feature_names == ds.IRIS_FEATURES


def test_iris_setosa_linearly_separable_on_petals():
    from scipy.optimize import linprog

    d = ds.load_iris()
    x = d.features[:, 2:]
    s = np.where(d.labels == 0, 1.0, -1.0)
    # feasibility of s_i (w . x_i + b) >= 1
    A = -s[:, None] * np.column_stack([x, np.ones(len(x))])
    res = linprog(np.zeros(3), A_ub=A, b_ub=-np.ones(len(x)), bounds=[(None, None)] * 3)
    assert res.status == 0
    # versicolor and virginica are not separable on petals
    m = d.labels > 0
    s2 = np.where(d.labels[m] == 1, 1.0, -1.0)
    A2 = -s2[:, None] * np.column_stack([x[m], np.ones(m.sum())])
    assert linprog(np.zeros(3), A_ub=A2, b_ub=-np.ones(m.sum()), bounds=[(None, None)] * 3).status == 2


def test_iris_matches_sklearn_copy():
    sk = pytest.importorskip("sklearn.datasets")
    ref = sk.load_iris()
    d = ds.load_iris()
    np.testing.assert_array_equal(d.features, ref.data)
    np.testing.assert_array_equal(d.labels, ref.target)


def test_csv_round_trip():
    d = ds.gen_gaussian_clusters(n_per_class=10, test_frac=0.3, seed=6)
    d = d.with_extra(ds.far_probes([[0, 0]], n=5, seed=1), [-1] * 5, "ood")
    back = ds.LabeledDataset.from_csv(d.to_csv(), n_classes=3)
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.labels, d.labels) and list(back.splits) == list(d.splits)
    r = ds.gen_poly_regression(n=20, seed=2)
    rb = ds.LabeledDataset.from_csv(r.to_csv())
    assert np.array_equal(rb.labels, r.labels) and np.array_equal(rb.features, r.features)
    with pytest.raises(ValueError):
        ds.LabeledDataset.from_csv("a,b\n1,2\n")


def test_dataset_validation():
    with pytest.raises(ValueError):
        ds.LabeledDataset(np.zeros((2, 1)), [0, 1], ["train", "bogus"], 2)
    with pytest.raises(ValueError):
        ds.LabeledDataset(np.zeros((2, 1)), [0, 2], ["train", "train"], 2)
    with pytest.raises(ValueError):
        ds.LabeledDataset(np.array([[np.nan], [0]]), [0, 1], ["train", "train"], 2)
    d = ds.LabeledDataset(np.zeros((2, 1)), [0, 1], ["train", "train"], 2)
    with pytest.raises(ValueError):
        d.features[0, 0] = 1.0


@given(st.integers(0, 2**31 - 1), st.floats(0.5, 3.0))
def test_far_probes_respect_exclusion(seed, scale):
    c = np.array([[0.0, 0.0], [5.0, 1.0]]) * scale
    p = ds.far_probes(c, scale, n=50, seed=seed)
    assert p.shape == (50, 2)
    dist = np.sqrt(((p[:, None] - c[None]) ** 2).sum(-1)).min(1)
    assert np.all(dist >= 6 * scale)


def test_splits_partition_rows():
    d = ds.gen_poly_regression(n=40, seed=0)
    total = sum(d.mask(s).sum() for s in ds.SPLITS)
    assert total == len(d)
