"""Canned experiments: the Iris prior-network demo and the cluster OOD run."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import harness as h
from .nn import MLPConfig

__all__ = [
    "IRIS_PROBES",
    "iris_config",
    "IrisDemo",
    "run_iris_demo",
    "cluster_config",
    "cluster_ood_run",
]

# Petal (length, width) in cm.  "overlap" sits between the versicolor and
# virginica centroids, "between" between setosa and versicolor, and "far" in
# the empty stretch above the gap, away from all three clusters.
IRIS_PROBES: dict[str, tuple[float, float]] = {
    "overlap": (4.9, 1.68),
    "between": (2.86, 0.79),
    "far": (3.0, 1.5),
}

PROBE_COLUMNS = ("probe_id", "ee", "mi", "vacuity", "precision")
GRID_COLUMNS = ("petal_length", "petal_width", "ee", "mi", "vacuity", "precision")


def iris_config(seed: int = 0, epochs: int = 500) -> h.RunConfig:
    """Three 100-unit ReLU layers, expected l2 loss plus 0.05 x KL to uniform on
    the true-class-masked concentrations, Adam at 1e-3, petal features only."""
    return h.RunConfig(
        dataset={"name": "iris", "petal_only": True},
        model=MLPConfig((2, 100, 100, 100, 3), "relu", "exp", seed),
        loss="l2",
        regularizer="kl_uniform",
        reg_weight=0.05,
        reg_hyper={"masked": True},
        lr=1e-3,
        epochs=epochs,
        seed=seed,
        standardize=True,
    )


@dataclass
class IrisDemo:
    model: h.TrainResult
    accuracy: float
    probes: dict[str, dict[str, float]]
    grid: np.ndarray  # columns petal_length, petal_width, ee, mi, vacuity, precision
    simplex: dict[str, np.ndarray]

    def probe_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PROBE_COLUMNS)
        for k, row in self.probes.items():
            w.writerow([k] + [repr(float(row[c])) for c in PROBE_COLUMNS[1:]])
        return buf.getvalue()

    def grid_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for row in self.grid:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def run_iris_demo(seed: int = 0, epochs: int = 500, resolution: int = 40) -> IrisDemo:
    cfg = iris_config(seed, epochs)
    data = h.build_dataset(cfg.dataset, seed)
    model = h.train_classifier(cfg, data)
    x, y = data.subset("train")
    acc = float(np.mean(h.predict_alphas(model, x).argmax(axis=1) == y))

    pts = np.array(list(IRIS_PROBES.values()))
    alpha = h.predict_alphas(model, pts)
    t = h.uncertainty_table(alpha)
    probes = {
        k: {"petal_length": float(pts[i, 0]), "petal_width": float(pts[i, 1]),
            **{c: float(t[c][i]) for c in ("ee", "mi", "vacuity", "precision")}}
        for i, k in enumerate(IRIS_PROBES)
    }
    L, W = np.meshgrid(np.linspace(0.0, 8.0, 33), np.linspace(0.0, 3.0, 25))
    g = np.column_stack([L.ravel(), W.ravel()])
    tg = h.uncertainty_table(h.predict_alphas(model, g))
    grid = np.column_stack([g] + [tg[c] for c in ("ee", "mi", "vacuity", "precision")])
    simplex = {k: h.simplex_grid(alpha[i], resolution) for i, k in enumerate(IRIS_PROBES)}
    return IrisDemo(model, acc, probes, grid, simplex)


def cluster_config(seed: int = 0, epochs: int = 300) -> h.RunConfig:
    """UCE prior network on three unit-variance blobs 5 units from the origin.

    Gaussian hidden units make the network fall back to its output bias away
    from the data; with relu or tanh the concentrations keep growing there.
    """
    return h.RunConfig(
        dataset={
            "name": "clusters", "K": 3, "n_per_class": 100, "scale": 1.0, "seed": seed,
            "ood_probes": {"centers": _circle_centres(3, 5.0).tolist(), "scale": 1.0, "n": 300,
                           "min_sigma": 6.0, "seed": seed + 1000},
        },
        model=MLPConfig((2, 100, 100, 3), "gauss", "exp", seed),
        loss="uce",
        lr=1e-3,
        epochs=epochs,
        seed=seed,
    )


def _circle_centres(K: int, radius: float) -> np.ndarray:
    ang = 2 * np.pi * np.arange(K) / K
    return radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def cluster_ood_run(seed: int = 0, epochs: int = 300, score: str = "mutual_information") -> dict:
    cfg = cluster_config(seed, epochs)
    data = h.build_dataset(cfg.dataset, seed)
    model = h.train_classifier(cfg, data)
    x, y = data.subset("train")
    out = h.evaluate_ood(model, data, score)
    out["train_accuracy"] = float(np.mean(h.predict_alphas(model, x).argmax(axis=1) == y))
    out["mean_mi_train"] = float(h.uncertainty_table(h.predict_alphas(model, x))["mi"].mean())
    out["mean_mi_ood"] = float(h.uncertainty_table(h.predict_alphas(model, data.subset("ood")[0]))["mi"].mean())
    return out
