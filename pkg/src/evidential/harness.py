"""Training loops, ensemble baseline and the evaluation suite."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import autodiff as ad
from . import datasets as ds
from . import dirichlet as dr
from . import losses as ls
from .nn import AdamState, MLPConfig, ParamSet, adam_step, forward, init_params
from .special_fn import DomainError

__all__ = [
    "RunConfig",
    "ConfigError",
    "TrainingError",
    "TrainResult",
    "EvalReport",
    "build_dataset",
    "train_classifier",
    "train_ensemble",
    "model_to_json",
    "model_from_json",
    "predict_alphas",
    "bma_predict",
    "uncertainty_table",
    "SCORES",
    "auroc",
    "aupr",
    "evaluate_ood",
    "evaluate_misclassification",
    "ece",
    "evaluate",
    "simplex_grid",
    "simplex_csv",
]


class ConfigError(ValueError):
    """A run configuration that fails validation."""


class TrainingError(RuntimeError):
    pass


@dataclass
class RunConfig:
    dataset: dict = field(default_factory=lambda: {"name": "iris"})
    model: MLPConfig | None = None
    loss: str = "uce"
    hyper: dict = field(default_factory=dict)
    regularizer: str | None = None
    reg_weight: float = 0.0
    reg_hyper: dict = field(default_factory=dict)
    ood_loss: str | None = None
    ood_weight: float = 1.0
    ood_hyper: dict = field(default_factory=dict)
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int | None = None
    seed: int = 0
    standardize: bool = False
    score: str = "mutual_information"
    out_dir: str | None = None

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = MLPConfig.from_dict(self.model)
        self.betas = tuple(self.betas)
        self.validate()

    def validate(self):
        keys = ls.registry_keys()
        for name in ("loss", "regularizer", "ood_loss"):
            k = getattr(self, name)
            if k is not None and k not in keys:
                raise ConfigError(f"unknown loss key {k!r} in field {name!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.reg_weight < 0 or self.ood_weight < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.score not in SCORES:
            raise ConfigError(f"unknown uncertainty score {self.score!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = None if self.model is None else self.model.to_dict()
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(extra))}")
        try:
            return cls(**d)
        except (TypeError, KeyError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from e

    @classmethod
    def from_json(cls, path) -> RunConfig:
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(obj)


# -- data ------------------------------------------------------------------------------

def build_dataset(spec: dict, seed: int = 0) -> ds.LabeledDataset:
    spec = dict(spec)
    name = spec.pop("name", None)
    probes = spec.pop("ood_probes", None)
    spec.setdefault("seed", seed)
    if name == "iris":
        spec.pop("seed")
        data = ds.load_iris()
        if spec.pop("petal_only", False):
            data = ds.LabeledDataset(data.features[:, 2:], data.labels, data.splits, 3, data.feature_names[2:])
    elif name == "clusters":
        data = ds.gen_gaussian_clusters(**spec)
    elif name == "spirals":
        data = ds.gen_spirals(**spec)
    elif name == "csv":
        text = Path(spec["path"]).read_text(encoding="utf-8")
        data = ds.LabeledDataset.from_csv(text, spec.get("n_classes"))
    else:
        raise ConfigError(f"unknown dataset {name!r}")
    if probes is not None:
        pts = ds.far_probes(**probes)
        data = data.with_extra(pts, np.full(pts.shape[0], -1), "ood")
    return data


# -- training ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    """Trained weights plus the input standardization they expect."""

    params: ParamSet
    history: list[float]
    config: MLPConfig
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None

    def transform(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.shift is None:
            return x
        return (x - self.shift) / self.scale


def _default_model(cfg: RunConfig, data: ds.LabeledDataset) -> MLPConfig:
    if cfg.model is not None:
        if cfg.model.widths[0] != data.dim or cfg.model.widths[-1] != data.n_classes:
            raise ConfigError(
                f"model widths {cfg.model.widths} do not fit {data.dim} features and {data.n_classes} classes"
            )
        return cfg.model
    return MLPConfig((data.dim, 100, 100, 100, data.n_classes), "relu", "exp", cfg.seed)


def _objective(cfg: RunConfig, alpha, y, alpha_ood=None):
    total = ad.mean(ls.batch_loss(cfg.loss, alpha, y, cfg.hyper))
    if cfg.regularizer is not None and cfg.reg_weight > 0:
        total = total + cfg.reg_weight * ad.mean(ls.batch_loss(cfg.regularizer, alpha, y, cfg.reg_hyper))
    if alpha_ood is not None:
        h = dict(cfg.ood_hyper)
        h.setdefault("ood", True)
        total = total + cfg.ood_weight * ad.mean(ls.batch_loss(cfg.ood_loss, alpha_ood, None, h))
    return total


def train_classifier(cfg: RunConfig, data: ds.LabeledDataset | None = None, seed_offset: int = 0) -> TrainResult:
    """Adam on the configured objective; full batch unless ``batch_size`` is set."""
    data = build_dataset(cfg.dataset, cfg.seed) if data is None else data
    if data.n_classes is None:
        raise ConfigError("train_classifier needs a classification dataset")
    model = _default_model(cfg, data)
    seed = cfg.seed + seed_offset
    params = init_params(model, seed)
    x, y = data.subset("train")
    x_ood = data.subset("ood")[0] if cfg.ood_loss else None
    if cfg.ood_loss and x_ood.shape[0] == 0:
        raise ConfigError("ood_loss is set but the dataset has no ood rows")
    shift = scale = None
    if cfg.standardize:
        shift = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        x = (x - shift) / scale
        x_ood = None if x_ood is None else (x_ood - shift) / scale
    state = AdamState()
    history: list[float] = []
    shuffle = np.random.default_rng([seed, 1])
    n = x.shape[0]
    bs = n if cfg.batch_size is None else min(cfg.batch_size, n)
    for epoch in range(cfg.epochs):
        order = np.arange(n) if bs == n else shuffle.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            leaves = {k: ad.Tensor(v, track=True, name=k) for k, v in params.tensors.items()}
            with ad.Tape() as tape:
                alpha = forward(leaves, model, x[idx])
                alpha_ood = forward(leaves, model, x_ood) if x_ood is not None else None
                loss = _objective(cfg, alpha, y[idx], alpha_ood)
            val = loss.item()
            if not math.isfinite(val):
                raise TrainingError(f"non-finite loss {val} at epoch {epoch} (loss {cfg.loss!r}, lr {cfg.lr})")
            grads = ad.backward(tape, loss)
            g = {k: grads.get(t, np.zeros_like(t.data)) for k, t in leaves.items()}
            params, state = adam_step(params, g, state, cfg.lr, cfg.betas, cfg.eps)
            epoch_loss += val * len(idx) / n
        history.append(epoch_loss)
    return TrainResult(params, history, model, shift, scale)


def model_to_json(model: TrainResult) -> str:
    return json.dumps(
        {
            "format": "evidential-model",
            "mlp": model.config.to_dict(),
            "params": json.loads(model.params.to_json()),
            "shift": None if model.shift is None else model.shift.tolist(),
            "scale": None if model.scale is None else model.scale.tolist(),
            "history": model.history,
        },
        sort_keys=True,
    ) + "\n"


def model_from_json(text: str) -> TrainResult:
    obj = json.loads(text)
    if obj.get("format") != "evidential-model":
        raise ConfigError("not a serialized evidential model")
    params = ParamSet.from_json(json.dumps(obj["params"]))
    shift = None if obj.get("shift") is None else np.asarray(obj["shift"], dtype=float)
    scale = None if obj.get("scale") is None else np.asarray(obj["scale"], dtype=float)
    return TrainResult(params, list(obj.get("history", [])), MLPConfig.from_dict(obj["mlp"]), shift, scale)


def train_ensemble(cfg: RunConfig, M: int, data: ds.LabeledDataset | None = None) -> list[TrainResult]:
    """M members that differ only in seed offset 0..M-1."""
    if M < 2:
        raise ValueError("an ensemble needs M >= 2 members")
    data = build_dataset(cfg.dataset, cfg.seed) if data is None else data
    return [train_classifier(cfg, data, seed_offset=m) for m in range(M)]


# -- prediction and uncertainty --------------------------------------------------------

def predict_alphas(model: TrainResult, x) -> np.ndarray:
    return np.asarray(forward(model.params, model.config, model.transform(x)))


def bma_predict(members: list[TrainResult], x) -> np.ndarray:
    """Average of member predictive distributions, one row per input."""
    if not members:
        raise ValueError("need at least one member")
    probs = [a / a.sum(axis=1, keepdims=True) for a in (predict_alphas(m, x) for m in members)]
    return np.mean(probs, axis=0)


def uncertainty_table(alpha: np.ndarray) -> dict[str, np.ndarray]:
    a = np.asarray(alpha, dtype=float)
    K = a.shape[-1]
    a0 = a.sum(axis=-1)
    return {
        "ee": np.asarray(dr.batch_expected_entropy(a)),
        "mi": np.asarray(dr.batch_mutual_information(a)),
        "vacuity": K / a0,
        "precision": a0,
        "max_alpha": a.max(axis=-1),
    }


# Larger score means "more likely OOD / wrong".
SCORES = {
    "mutual_information": lambda t: t["mi"],
    "expected_entropy": lambda t: t["ee"],
    "vacuity": lambda t: t["vacuity"],
    "neg_max_alpha": lambda t: -t["max_alpha"],
    "neg_precision": lambda t: -t["precision"],
}


def auroc(scores, positive) -> float | None:
    """Probability that a positive outscores a negative, ties counting one half."""
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(positive, dtype=bool)
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(s)  # midranks for ties
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def aupr(scores, positive) -> float | None:
    """Average precision with positives as the relevant class; tied scores form one step."""
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(positive, dtype=bool)
    n_pos = int(pos.sum())
    if n_pos == 0 or n_pos == pos.size:
        return None
    order = np.argsort(-s, kind="mergesort")
    s, pos = s[order], pos[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(pos)[last]
    fp = (last + 1) - tp
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def evaluate_ood(model: TrainResult, data: ds.LabeledDataset, score: str = "mutual_information") -> dict:
    """OOD rows are positives, in-distribution rows (test if present, else train) negatives."""
    if score not in SCORES:
        raise KeyError(f"unknown score {score!r}; known: {', '.join(SCORES)}")
    ood = data.mask("ood")
    if not ood.any():
        raise ValueError("dataset has no ood rows")
    id_mask = data.mask("test") if data.mask("test").any() else data.mask("train")
    keep = ood | id_mask
    table = uncertainty_table(predict_alphas(model, data.features[keep]))
    s = SCORES[score](table)
    return {"ood_auroc": auroc(s, ood[keep]), "ood_aupr": aupr(s, ood[keep]), "score": score}


def evaluate_misclassification(model: TrainResult, data: ds.LabeledDataset, score: str = "expected_entropy",
                               split: str | None = None) -> float | None:
    """AUROC of the score for wrong (positive) versus right predictions; None if either is empty."""
    split = split or ("test" if data.mask("test").any() else "train")
    x, y = data.subset(split)
    alpha = predict_alphas(model, x)
    wrong = alpha.argmax(axis=1) != y
    return auroc(SCORES[score](uncertainty_table(alpha)), wrong)


def ece(probs, labels, bins: int = 15) -> float:
    """Confidence-binned calibration error; bins are (lo, hi] on the max probability."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    p = np.atleast_2d(np.asarray(probs, dtype=float))
    y = np.asarray(labels, dtype=int)
    conf = p.max(axis=1)
    correct = (p.argmax(axis=1) == y).astype(float)
    idx = np.clip(np.ceil(conf * bins).astype(int) - 1, 0, bins - 1)
    total = 0.0
    for b in range(bins):
        m = idx == b
        if m.any():
            total += m.sum() * abs(correct[m].mean() - conf[m].mean())
    return float(total / p.shape[0])


@dataclass
class EvalReport:
    accuracy: float
    ood_auroc: float | None
    ood_aupr: float | None
    misclassification_auroc: float | None
    ece: float
    score: str
    table: dict[str, list] = field(default_factory=dict, repr=False)

    def to_json(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k != "table"}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def table_csv(self) -> str:
        cols = ["row", "split", "label", "pred", "ee", "mi", "vacuity", "precision"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for i in range(len(self.table.get("row", []))):
            w.writerow([self.table[c][i] if c in ("row", "split", "label", "pred") else repr(self.table[c][i])
                        for c in cols])
        return buf.getvalue()


def evaluate(model: TrainResult, data: ds.LabeledDataset, score: str = "mutual_information") -> EvalReport:
    split = "test" if data.mask("test").any() else "train"
    x, y = data.subset(split)
    alpha = predict_alphas(model, x)
    probs = alpha / alpha.sum(axis=1, keepdims=True)
    acc = float(np.mean(probs.argmax(axis=1) == y))
    if data.mask("ood").any():
        o = evaluate_ood(model, data, score)
        ood_auroc, ood_aupr = o["ood_auroc"], o["ood_aupr"]
    else:
        ood_auroc = ood_aupr = None
    all_alpha = predict_alphas(model, data.features)
    t = uncertainty_table(all_alpha)
    table = {
        "row": list(range(len(data))),
        "split": data.splits.tolist(),
        "label": [int(v) for v in data.labels],
        "pred": all_alpha.argmax(axis=1).tolist(),
        **{k: t[k].tolist() for k in ("ee", "mi", "vacuity", "precision")},
    }
    return EvalReport(acc, ood_auroc, ood_aupr, evaluate_misclassification(model, data, split=split),
                      ece(probs, y), score, table)


# -- simplex density grids ---------------------------------------------------------------

def simplex_grid(alphas, resolution: int = 30) -> np.ndarray:
    """Dirichlet density at the centroids of a ``resolution``^2 triangulation of the simplex.

    Returns (n, 4) rows (a, b, c, density).  Every cell has area 1/(2 resolution^2)
    in the (a, b) chart.
    """
    d = alphas if isinstance(alphas, dr.DirichletParams) else dr.DirichletParams(alphas)
    if d.K != 3:
        raise DomainError("simplex grids need K = 3")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    r = resolution
    pts = []
    for i in range(r):
        for j in range(r - i):
            pts.append(((i + 1 / 3) / r, (j + 1 / 3) / r))
            if i + j <= r - 2:
                pts.append(((i + 2 / 3) / r, (j + 2 / 3) / r))
    ab = np.array(pts)
    bary = np.column_stack([ab, 1.0 - ab.sum(axis=1)])
    a = d.alphas
    log_norm = float(ad.value(dr.batch_log_beta(a)))
    dens = np.exp(np.log(bary) @ (a - 1.0) - log_norm)
    return np.column_stack([bary, dens])


def simplex_csv(grid: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["a", "b", "c", "density"])
    for row in grid:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
