import itertools
import json
import math

import numpy as np
import pytest

from evidential import datasets as ds
from evidential import demos
from evidential import harness as h
from evidential.nn import MLPConfig, ParamSet
from evidential.special_fn import DomainError


def constant_model(alpha, dim=2):
    """A network whose output is ``alpha`` for every input."""
    alpha = np.asarray(alpha, dtype=float)
    cfg = MLPConfig((dim, 1, alpha.size), "relu", "exp")
    p = ParamSet({"W0": np.zeros((dim, 1)), "b0": np.zeros(1),
                  "W1": np.zeros((1, alpha.size)), "b1": np.log(alpha)})
    return h.TrainResult(p, [], cfg)


def brute_auroc(s, pos):
    s, pos = np.asarray(s), np.asarray(pos, dtype=bool)
    wins = 0.0
    for a, b in itertools.product(s[pos], s[~pos]):
        wins += 1.0 if a > b else 0.5 if a == b else 0.0
    return wins / (pos.sum() * (~pos).sum())


# -- config -----------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(h.ConfigError, match="bogus"):
        h.RunConfig(loss="bogus")
    with pytest.raises(h.ConfigError):
        h.RunConfig(regularizer="nope")
    with pytest.raises(h.ConfigError):
        h.RunConfig(epochs=-1)
    with pytest.raises(h.ConfigError):
        h.RunConfig(score="loudness")
    with pytest.raises(h.ConfigError, match="colour"):
        h.RunConfig.from_dict({"colour": "red"})


def test_config_round_trip(tmp_path):
    cfg = demos.iris_config(3)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = h.RunConfig.from_json(path)
    assert back == cfg
    path.write_text("{not json")
    with pytest.raises(h.ConfigError):
        h.RunConfig.from_json(path)


def test_build_dataset():
    iris = h.build_dataset({"name": "iris", "petal_only": True})
    assert iris.dim == 2 and iris.feature_names == ("petal_length", "petal_width")
    cl = h.build_dataset({"name": "clusters", "n_per_class": 10, "ood_probes": {"centers": [[0, 0]], "n": 7}}, 1)
    assert cl.mask("ood").sum() == 7 and np.all(cl.labels[cl.mask("ood")] == -1)
    with pytest.raises(h.ConfigError):
        h.build_dataset({"name": "mnist"})


# -- training ---------------------------------------------------------------------

def _small_cfg(**kw):
    base = dict(dataset={"name": "clusters", "n_per_class": 30, "centers": [[0, 0], [12, 0], [0, 12]]},
                model=MLPConfig((2, 16, 3), "relu", "exp", 0), loss="uce", lr=1e-2, epochs=60)
    base.update(kw)
    return h.RunConfig(**base)


def test_separable_clusters_reach_full_accuracy():
    cfg = _small_cfg()
    data = h.build_dataset(cfg.dataset, cfg.seed)
    m = h.train_classifier(cfg, data)
    x, y = data.subset("train")
    assert np.mean(h.predict_alphas(m, x).argmax(1) == y) == 1.0
    assert m.history[-1] < m.history[0]


def test_iris_recipe_accuracy():
    demo = demos.run_iris_demo(seed=0, resolution=5)
    assert demo.accuracy >= 0.95


def test_zero_epochs_returns_initialisation():
    from evidential.nn import init_params

    cfg = _small_cfg(epochs=0)
    m = h.train_classifier(cfg)
    assert m.params.equal(init_params(cfg.model, cfg.seed)) and m.history == []


def test_training_is_deterministic_and_minibatches_work():
    cfg = _small_cfg(epochs=5, batch_size=16)
    a, b = h.train_classifier(cfg), h.train_classifier(cfg)
    assert a.params.equal(b.params) and a.history == b.history
    assert not a.params.equal(h.train_classifier(_small_cfg(epochs=5)).params)


def test_nan_loss_aborts():
    cfg = _small_cfg(lr=1e6, epochs=50, loss="renyi",
                     dataset={"name": "clusters", "n_per_class": 30, "centers": [[0, 0], [1e3, 0], [0, 1e3]]})
    with pytest.raises(h.TrainingError, match="non-finite"):
        h.train_classifier(cfg)


def test_model_shape_mismatch():
    with pytest.raises(h.ConfigError):
        h.train_classifier(_small_cfg(model=MLPConfig((3, 4, 3))))


def test_ood_loss_needs_ood_rows():
    with pytest.raises(h.ConfigError):
        h.train_classifier(_small_cfg(ood_loss="kl_uniform"))


def test_ood_objective_trains():
    cfg = _small_cfg(epochs=3, ood_loss="reverse_kl",
                     dataset={"name": "clusters", "n_per_class": 10, "ood_probes": {"centers": [[0, 0]], "n": 5}})
    assert len(h.train_classifier(cfg).history) == 3


def test_model_json_round_trip():
    m = h.train_classifier(_small_cfg(epochs=3, standardize=True))
    back = h.model_from_json(h.model_to_json(m))
    x = np.random.default_rng(0).normal(size=(4, 2))
    assert np.array_equal(h.predict_alphas(back, x), h.predict_alphas(m, x))
    with pytest.raises(h.ConfigError):
        h.model_from_json('{"format": "other"}')


def test_ensemble_members():
    cfg = _small_cfg(epochs=3)
    ens = h.train_ensemble(cfg, 2)
    assert not ens[0].params.equal(ens[1].params)
    assert ens[0].params.equal(h.train_classifier(cfg).params)
    again = h.train_ensemble(cfg, 2)
    assert all(a.params.equal(b.params) for a, b in zip(ens, again))
    with pytest.raises(ValueError):
        h.train_ensemble(cfg, 1)


def test_bma_predict():
    x = np.zeros((3, 2))
    m1, m2 = constant_model([1e6, 1e-6]), constant_model([1e-6, 1e6])
    np.testing.assert_allclose(h.bma_predict([m1, m2], x), 0.5, atol=1e-10)
    single = h.bma_predict([constant_model([1, 3])], x)
    np.testing.assert_allclose(single, [[0.25, 0.75]] * 3)
    np.testing.assert_allclose(h.bma_predict([constant_model([1, 3])] * 4, x), single)


# -- metrics ----------------------------------------------------------------------

def test_auroc_matches_brute_force():
    rng = np.random.default_rng(0)
    for n in (5, 37, 200):
        s = np.round(rng.normal(size=n), 1)  # rounding creates ties
        pos = rng.random(n) < 0.4
        pos[0], pos[1] = True, False
        assert h.auroc(s, pos) == pytest.approx(brute_auroc(s, pos), abs=1e-12)


def test_auroc_edge_cases():
    assert h.auroc([0.1, 0.2, 0.9, 0.8], [0, 0, 1, 1]) == 1.0
    assert h.auroc([1.0, 1.0], [0, 1]) == 0.5
    assert h.auroc([1, 2], [1, 1]) is None
    rng = np.random.default_rng(1)
    pos = np.arange(2000) < 1000
    assert abs(h.auroc(rng.random(2000), pos) - 0.5) <= 0.05


def test_aupr_matches_sklearn():
    skm = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(2)
    for _ in range(20):
        s = np.round(rng.normal(size=60), 1)
        pos = rng.random(60) < 0.3
        pos[0], pos[1] = True, False
        assert h.aupr(s, pos) == pytest.approx(skm.average_precision_score(pos, s), abs=1e-12)
    assert h.aupr([0.5, 0.6], [0, 0]) is None


def test_ece_constructions():
    # bin (0.6, 0.667]: confidence 0.65 with 65% right; bin (0.8, 0.867]: 0.85 with 85% right
    probs = np.array([[0.65, 0.35]] * 20 + [[0.85, 0.15]] * 20)
    labels = np.array([0] * 13 + [1] * 7 + [0] * 17 + [1] * 3)
    assert h.ece(probs, labels) == pytest.approx(0.0, abs=1e-12)
    assert h.ece(np.eye(3)[[0, 1, 2]], [0, 1, 2]) == 0.0
    half = h.ece(np.array([[1.0, 0.0]] * 100), [0, 1] * 50)
    assert half == pytest.approx(0.5)
    with pytest.raises(ValueError):
        h.ece(probs, labels, bins=0)


def test_uncertainty_table_and_scores():
    t = h.uncertainty_table(np.array([[1.0, 1.0, 1.0], [10.0, 5.0, 5.0]]))
    np.testing.assert_allclose(t["vacuity"], [1.0, 0.15])
    np.testing.assert_allclose(t["precision"], [3, 20])
    assert set(h.SCORES) == {"mutual_information", "expected_entropy", "vacuity", "neg_max_alpha", "neg_precision"}
    np.testing.assert_allclose(h.SCORES["neg_max_alpha"](t), [-1, -10])


def test_evaluate_ood_requires_rows():
    data = ds.gen_gaussian_clusters(n_per_class=4)
    with pytest.raises(ValueError):
        h.evaluate_ood(constant_model([1, 1, 1]), data)
    with pytest.raises(KeyError):
        h.evaluate_ood(constant_model([1, 1, 1]), data.with_extra([[50, 50]], [-1], "ood"), "loudness")


def test_misclassification_absent_when_all_right():
    data = ds.LabeledDataset(np.zeros((4, 2)), [1, 1, 1, 1], ["train"] * 4, 2)
    assert h.evaluate_misclassification(constant_model([1, 5]), data) is None


def test_evaluate_report_is_deterministic():
    cfg = _small_cfg(epochs=10, dataset={"name": "clusters", "n_per_class": 20, "test_frac": 0.25,
                                         "ood_probes": {"centers": [[5, 0]], "n": 20, "seed": 3}})
    data = h.build_dataset(cfg.dataset, cfg.seed)
    r1 = h.evaluate(h.train_classifier(cfg, data), data)
    r2 = h.evaluate(h.train_classifier(cfg, data), data)
    assert r1.to_json() == r2.to_json() and r1.table_csv() == r2.table_csv()
    for v in (r1.accuracy, r1.ood_auroc, r1.ood_aupr, r1.ece):
        assert 0.0 <= v <= 1.0


def test_trained_prior_net_raises_mi_off_data():
    run = demos.cluster_ood_run(seed=0, epochs=150)
    assert run["mean_mi_ood"] > run["mean_mi_train"]
    assert run["train_accuracy"] >= 0.97


# -- simplex grid -----------------------------------------------------------------

def test_simplex_uniform_density_is_two():
    g = h.simplex_grid([1, 1, 1], 20)
    assert g.shape == (400, 4)
    np.testing.assert_allclose(g[:, 3], 2.0, rtol=1e-12)
    np.testing.assert_allclose(g[:, :3].sum(1), 1.0, rtol=1e-14)


@pytest.mark.parametrize("alpha", [(1, 1, 1), (2, 3, 4), (1.5, 1.2, 6.0)])
def test_simplex_grid_integrates_to_one(alpha):
    r = 60
    g = h.simplex_grid(alpha, r)
    assert g[:, 3].sum() / (2 * r * r) == pytest.approx(1.0, rel=0.01)


def test_simplex_peak_near_mode():
    a = np.array([40.0, 25.0, 15.0])
    g = h.simplex_grid(a, 80)
    peak = g[np.argmax(g[:, 3]), :3]
    np.testing.assert_allclose(peak, (a - 1) / (a.sum() - 3), atol=0.02)
    np.testing.assert_allclose(peak, a / a.sum(), atol=0.03)


def test_simplex_errors_and_csv():
    with pytest.raises(DomainError):
        h.simplex_grid([1, 1], 10)
    text = h.simplex_csv(h.simplex_grid([2, 2, 2], 2))
    lines = text.strip().split("\n")
    assert lines[0] == "a,b,c,density" and len(lines) == 5
    assert math.isclose(sum(float(v) for v in lines[1].split(",")[:3]), 1.0)
