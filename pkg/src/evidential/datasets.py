"""Deterministic toy datasets and the embedded Iris measurements."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

__all__ = [
    "LabeledDataset",
    "SPLITS",
    "gen_gaussian_clusters",
    "gen_spirals",
    "gen_poly_regression",
    "load_iris",
    "far_probes",
    "IRIS_FEATURES",
    "IRIS_CLASSES",
]

SPLITS = ("train", "test", "ood")
IRIS_FEATURES = ("sepal_length", "sepal_width", "petal_length", "petal_width")
IRIS_CLASSES = ("setosa", "versicolor", "virginica")


@dataclass(frozen=True)
class LabeledDataset:
    """Rows of features with a label and a split tag each.

    ``labels`` holds class indices when ``n_classes`` is set, real targets otherwise.
    OOD rows of a classification set carry label -1.
    """

    features: np.ndarray
    labels: np.ndarray
    splits: np.ndarray
    n_classes: int | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        n = x.shape[0]
        s = np.array(self.splits, dtype=object).reshape(-1)
        if s.shape[0] != n:
            raise ValueError("split tags must cover every row")
        bad = set(s.tolist()) - set(SPLITS)
        if bad:
            raise ValueError(f"unknown split tags {sorted(bad)}")
        if not np.all(np.isfinite(x)):
            raise ValueError("features contain NaN or inf")
        if self.n_classes is not None:
            y = np.array(self.labels, dtype=int).reshape(-1)
            ood = s == "ood"
            if np.any((y[~ood] < 0) | (y[~ood] >= self.n_classes)):
                raise ValueError("class label out of range")
        else:
            y = np.array(self.labels, dtype=float).reshape(-1)
            if not np.all(np.isfinite(y)):
                raise ValueError("targets contain NaN or inf")
        if y.shape[0] != n:
            raise ValueError("labels and features differ in length")
        for arr in (x, y, s):
            arr.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "splits", s)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def mask(self, split: str) -> np.ndarray:
        return self.splits == split

    def subset(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        m = self.mask(split)
        return self.features[m], self.labels[m]

    def with_extra(self, features, labels, split: str) -> LabeledDataset:
        """Append rows under one split tag."""
        f = np.atleast_2d(np.asarray(features, dtype=float))
        lab = np.asarray(labels).reshape(-1)
        return LabeledDataset(
            np.vstack([self.features, f]),
            np.concatenate([self.labels, lab]),
            np.concatenate([self.splits, np.full(f.shape[0], split, dtype=object)]),
            self.n_classes,
            self.feature_names,
        )

    def _names(self) -> list[str]:
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"x{i}" for i in range(self.dim)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self._names() + ["label", "split"])
        for row, y, s in zip(self.features, self.labels, self.splits):
            w.writerow([repr(float(v)) for v in row] + [str(int(y)) if self.n_classes else repr(float(y)), s])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n_classes: int | None = None) -> LabeledDataset:
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if header[-2:] != ["label", "split"]:
            raise ValueError("CSV must end with 'label' and 'split' columns")
        x = np.array([[float(v) for v in r[:-2]] for r in body])
        y = [r[-2] for r in body]
        return cls(x, np.array(y, dtype=float if n_classes is None else int), [r[-1] for r in body],
                   n_classes, tuple(header[:-2]))


def _tags(n: int, test_frac: float, rng: np.random.Generator) -> np.ndarray:
    tags = np.full(n, "train", dtype=object)
    n_test = int(round(test_frac * n))
    if n_test:
        tags[rng.permutation(n)[:n_test]] = "test"
    return tags


def gen_gaussian_clusters(
    K: int = 3,
    n_per_class: int = 100,
    centers=None,
    scale: float = 1.0,
    seed: int = 0,
    test_frac: float = 0.0,
) -> LabeledDataset:
    """Isotropic Gaussian blobs.  Default centres sit on a circle of radius 5 scale units."""
    if K < 2:
        raise ValueError("need at least two clusters")
    if centers is None:
        ang = 2 * np.pi * np.arange(K) / K
        centers = 5.0 * scale * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    c = np.asarray(centers, dtype=float)
    if c.ndim != 2 or c.shape[0] != K:
        raise ValueError(f"expected {K} centres, got {c.shape[0] if c.ndim == 2 else c.shape}")
    rng = np.random.default_rng(seed)
    x = np.concatenate([c[k] + scale * rng.standard_normal((n_per_class, c.shape[1])) for k in range(K)])
    y = np.repeat(np.arange(K), n_per_class)
    return LabeledDataset(x, y, _tags(len(y), test_frac, rng), K)


def gen_spirals(n: int = 300, noise: float = 0.1, seed: int = 0, arms: int = 2, turns: float = 1.5) -> LabeledDataset:
    """Interleaved Archimedean spirals; row order follows the spiral parameter within each arm."""
    if n < 10:
        raise ValueError("need n >= 10")
    if arms not in (2, 3):
        raise ValueError("arms must be 2 or 3")
    rng = np.random.default_rng(seed)
    counts = [n // arms + (1 if k < n % arms else 0) for k in range(arms)]
    xs, ys = [], []
    for k, m in enumerate(counts):
        t = np.linspace(0.05, 1.0, m)
        r = t
        theta = 2 * np.pi * turns * t + 2 * np.pi * k / arms
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        xs.append(pts + noise * rng.standard_normal(pts.shape))
        ys.append(np.full(m, k))
    return LabeledDataset(np.concatenate(xs), np.concatenate(ys), np.full(n, "train", dtype=object), arms)


def gen_poly_regression(
    range_id=(-4.0, 4.0),
    range_ood=(-6.0, 6.0),
    coeffs=(0.0, 0.0, 0.0, 1.0),
    noise_sd: float = 3.0,
    n: int = 1000,
    seed: int = 0,
    n_ood: int | None = None,
) -> LabeledDataset:
    """y = sum_j coeffs[j] x^j + noise.  Train rows cover ``range_id``; ood rows
    come from the part of ``range_ood`` outside it."""
    lo, hi = map(float, range_id)
    olo, ohi = map(float, range_ood)
    if not lo < hi:
        raise ValueError("empty in-distribution range")
    rng = np.random.default_rng(seed)
    x_id = rng.uniform(lo, hi, n)
    n_ood = n // 4 if n_ood is None else n_ood
    left, right = max(0.0, lo - olo), max(0.0, ohi - hi)
    if n_ood and left + right > 0:
        u = rng.uniform(0.0, left + right, n_ood)
        x_ood = np.where(u < left, olo + u, hi + (u - left))
        # keep the interval endpoints themselves in-range only
        x_ood = np.where(x_ood == hi, np.nextafter(hi, np.inf), x_ood)
    else:
        x_ood = np.empty(0)
    x = np.concatenate([x_id, x_ood])
    poly = np.polynomial.polynomial.polyval(x, np.asarray(coeffs, dtype=float))
    y = poly + noise_sd * rng.standard_normal(x.shape[0]) if noise_sd > 0 else poly
    tags = np.array(["train"] * n + ["ood"] * x_ood.shape[0], dtype=object)
    return LabeledDataset(x[:, None], y, tags)


def load_iris() -> LabeledDataset:
    text = resources.files("evidential").joinpath("data/iris.csv").read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))[1:]
    x = np.array([[float(v) for v in r[:4]] for r in rows])
    y = np.array([IRIS_CLASSES.index(r[4]) for r in rows])
    return LabeledDataset(x, y, np.full(len(y), "train", dtype=object), 3, IRIS_FEATURES)


def far_probes(centers, scale: float = 1.0, n: int = 200, min_sigma: float = 6.0,
               margin_sigma: float = 12.0, seed: int = 0) -> np.ndarray:
    """Uniform points in a box around the centres, rejecting any within
    ``min_sigma`` scale units of a centre.  The box extends ``margin_sigma``
    scale units beyond the outermost centre on every axis."""
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    if min_sigma >= margin_sigma:
        raise ValueError("the box margin must exceed the exclusion radius")
    lo = c.min(axis=0) - margin_sigma * scale
    hi = c.max(axis=0) + margin_sigma * scale
    rng = np.random.default_rng(seed)
    out = np.empty((0, c.shape[1]))
    while out.shape[0] < n:
        cand = rng.uniform(lo, hi, size=(4 * n, c.shape[1]))
        dist = np.sqrt(((cand[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1)).min(axis=1)
        out = np.vstack([out, cand[dist >= min_sigma * scale]])
    return out[:n]
