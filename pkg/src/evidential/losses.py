"""Classification objectives and regularizers for Dirichlet networks.

Every entry of :data:`REGISTRY` is a minimisation loss.  Kernels take a batch of
concentrations ``alpha`` of shape (B, K) (array or Tensor), integer labels of
shape (B,) and a hyperparameter mapping, and return a mapping of per-row
components whose sum is the loss.  Where the literature writes an objective as
a quantity to maximise, the un-negated value is kept under ``extras``.

The single-sample functions (``uce_loss`` ... ``elbo_loss``) wrap the kernels
for one :class:`LossContext` and return a :class:`LossValue`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import autodiff as ad
from .dirichlet import (
    DirichletParams,
    batch_entropy,
    batch_kl,
    batch_kl_to_uniform,
    batch_dissonance,
)
from .special_fn import DomainError, digamma

__all__ = [
    "LossContext",
    "LossValue",
    "LossSpec",
    "REGISTRY",
    "DEFAULT_HYPER",
    "registry_keys",
    "evaluate",
    "batch_loss",
    "masked_alphas",
    "uce_loss",
    "ce_loss",
    "l2_loss",
    "lp_bound_loss",
    "forward_kl_loss",
    "reverse_kl_loss",
    "renyi_reg",
    "kl_uniform_reg",
    "entropy_reg",
    "pac_reg",
    "rep_gap_losses",
    "distillation_loss",
    "vacuity_reg",
    "dissonance_reg",
    "wrong_class_kl_reg",
    "elbo_loss",
]

CLAMP_FLOOR = 1e-12


@dataclass(frozen=True)
class LossContext:
    """One prediction with its label and hyperparameters.

    ``label`` is a 0-based class index; OOD-only objectives accept ``None``.
    """

    alphas: DirichletParams
    label: int | None = None
    hyper: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.alphas, DirichletParams):
            object.__setattr__(self, "alphas", DirichletParams(self.alphas))
        if self.label is not None and not 0 <= self.label < self.alphas.K:
            raise IndexError(f"label {self.label} out of range for K={self.alphas.K}")

    @property
    def one_hot(self) -> np.ndarray:
        out = np.zeros(self.alphas.K)
        if self.label is not None:
            out[self.label] = 1.0
        return out


@dataclass
class LossValue:
    value: float
    components: dict[str, float]
    extras: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class LossSpec:
    key: str
    kernel: Callable
    needs_label: bool = True
    doc: str = ""


DEFAULT_HYPER: dict[str, dict[str, object]] = {
    "lp_bound": {"p": 2.0},
    "forward_kl": {"eps": 0.01, "target_precision": 100.0},
    # Table values as printed; alpha_out = 0 reduces OOD targets to the +1 offset.
    "reverse_kl": {"alpha_in": 0.01, "alpha_out": 0.0},
    "kl_uniform": {"masked": False},
    "pac": {"delta": 0.05, "N": 1.0},
    "rep_gap_id": {"lambda_in": 1.0},
    "rep_gap_ood": {"lambda_out": 1.0},
    "distillation": {"form": "likelihood", "clamp": False},
}


def _one_hot(y, K: int) -> np.ndarray:
    return np.eye(K)[np.asarray(y, dtype=int)]


def _rows(alpha) -> int:
    return ad.value(alpha).shape[0]


def _label_entry(alpha, y):
    """alpha[b, y_b] for every row."""
    return alpha[np.arange(_rows(alpha)), np.asarray(y, dtype=int)]


def masked_alphas(alpha, y):
    """Concentrations with the true class reset to 1: (1 - y) * alpha + y."""
    onehot = _one_hot(y, ad.value(alpha).shape[-1])
    return (1.0 - onehot) * alpha + onehot


# -- kernels --------------------------------------------------------------------

def _uce(alpha, y, hyper):
    a0 = ad.sum(alpha, axis=-1)
    loss = ad.digamma(a0) - ad.digamma(_label_entry(alpha, y))
    return {"uce": loss}, {"maximized_form": -ad.value(loss)}


def _ce(alpha, y, hyper):
    a0 = ad.sum(alpha, axis=-1)
    return {"ce": ad.log(a0) - ad.log(_label_entry(alpha, y))}, {}


def _l2(alpha, y, hyper):
    K = ad.value(alpha).shape[-1]
    a0 = ad.sum(alpha, axis=-1, keepdims=True)
    p = alpha / a0
    err = (_one_hot(y, K) - p) ** 2
    var = alpha * (a0 - alpha) / (a0 * a0 * (a0 + 1.0))
    return {"err": ad.sum(err, axis=-1), "var": ad.sum(var, axis=-1)}, {}


def _lp_bound(alpha, y, hyper):
    p = float(hyper["p"])
    if p < 1:
        raise DomainError("lp bound requires p >= 1")
    K = ad.value(alpha).shape[-1]
    onehot = _one_hot(y, K)
    a0 = ad.sum(alpha, axis=-1)
    rest = ad.sum(alpha * (1.0 - onehot), axis=-1, keepdims=True)  # a0 - a_y
    rest_full = rest * np.ones((1, K))
    # Column y carries the (1 - pi_y) moment, the others the pi_k moments.
    base = ad.where(onehot.astype(bool), rest_full, alpha)
    log_moments = ad.lgamma(base + p) - ad.lgamma(base)
    log_bound = (ad.lgamma(a0) - ad.lgamma(a0 + p) + ad.logsumexp(log_moments, axis=-1)) * (1.0 / p)
    return {"lp_bound": ad.exp(log_bound)}, {}


def _forward_target(K: int, y, eps: float, precision: float) -> np.ndarray:
    if not 0.0 < eps < 1.0 / K:
        raise DomainError(f"label smoothing eps must lie in (0, 1/K) = (0, {1.0 / K})")
    if precision <= 0:
        raise DomainError("target precision must be > 0")
    onehot = _one_hot(y, K)
    probs = onehot * (1.0 - (K - 1) * eps) + (1.0 - onehot) * eps
    return probs * precision


def _forward_kl(alpha, y, hyper):
    K = ad.value(alpha).shape[-1]
    target = _forward_target(K, y, float(hyper["eps"]), float(hyper["target_precision"]))
    return {"kl": batch_kl(target, alpha)}, {}


def _soft_labels(y, K: int, B: int, hyper) -> np.ndarray:
    soft = hyper.get("soft_label")
    if soft is None:
        return _one_hot(y, K)
    soft = np.atleast_2d(np.asarray(soft, dtype=float))
    if soft.shape[-1] != K or np.any(soft < 0) or np.any(np.abs(soft.sum(-1) - 1.0) > 1e-9):
        raise DomainError("soft label must be a non-negative vector of length K summing to 1")
    return np.broadcast_to(soft, (B, K))


def reverse_kl_targets(K: int, concentration: float) -> np.ndarray:
    """Per-class target rows: entry c of row k is 1[c = k] * concentration + 1."""
    return np.eye(K) * concentration + 1.0


def _reverse_kl(alpha, y, hyper):
    B, K = ad.value(alpha).shape
    targets = hyper.get("targets")
    if targets is None:
        conc = hyper["alpha_out"] if hyper.get("ood") else hyper["alpha_in"]
        targets = reverse_kl_targets(K, float(conc))
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (K, K) or np.any(targets <= 0):
        raise DomainError("reverse-KL targets must be a positive K x K matrix")
    mix = _soft_labels(y, K, B, hyper) @ targets
    return {"kl": batch_kl(alpha, mix)}, {"target_mixture": mix}


def _renyi(alpha, y, hyper):
    tilde = masked_alphas(alpha, y)
    t0 = ad.sum(tilde, axis=-1, keepdims=True)
    dev = tilde - 1.0  # zero in the label column
    tri0 = ad.trigamma(t0)
    diag = ad.sum(dev * dev * (ad.trigamma(tilde) - tri0), axis=-1)
    s = ad.sum(dev, axis=-1)
    cross = s * s - ad.sum(dev * dev, axis=-1)  # ordered pairs k != k'
    return {"renyi": 0.5 * (diag - ad.reshape(tri0, (-1,)) * cross)}, {}


def _kl_uniform(alpha, y, hyper):
    a = masked_alphas(alpha, y) if hyper.get("masked") else alpha
    return {"kl": batch_kl_to_uniform(a)}, {}


def _entropy_reg(alpha, y, hyper):
    h = batch_entropy(alpha)
    return {"neg_entropy": -h}, {"entropy": ad.value(h)}


def _pac(alpha, y, hyper):
    delta, n = float(hyper["delta"]), float(hyper["N"])
    if not 0.0 < delta < 1.0:
        raise DomainError("PAC confidence delta must lie in (0, 1)")
    if n < 1:
        raise DomainError("PAC sample size N must be >= 1")
    radicand = (batch_kl_to_uniform(alpha) - np.log(delta)) * (1.0 / n) - 1.0
    pos = ad.value(radicand) > 0
    safe = ad.where(pos, radicand, np.ones(pos.shape))
    val = ad.where(pos, ad.sqrt(safe), np.zeros(pos.shape))
    return {"pac": val}, {"clamped": (~pos).astype(float), "radicand": ad.value(radicand)}


def _precision_penalty(alpha, lam: float):
    K = ad.value(alpha).shape[-1]
    return -(lam / K) * ad.sum(ad.sigmoid(alpha), axis=-1)


def _rep_gap_id(alpha, y, hyper):
    a0 = ad.sum(alpha, axis=-1)
    ce = ad.log(a0) - ad.log(_label_entry(alpha, y))
    return {"ce": ce, "precision_penalty": _precision_penalty(alpha, float(hyper["lambda_in"]))}, {}


def _rep_gap_ood(alpha, y, hyper):
    K = ad.value(alpha).shape[-1]
    a0 = ad.sum(alpha, axis=-1, keepdims=True)
    ce = -(1.0 / K) * ad.sum(ad.log(alpha / a0), axis=-1)
    return {"uniform_ce": ce, "precision_penalty": _precision_penalty(alpha, float(hyper["lambda_out"]))}, {}


def _members(hyper, B: int, K: int) -> np.ndarray:
    m = hyper.get("members")
    if m is None:
        raise DomainError("distillation needs ensemble member probabilities under 'members'")
    m = np.asarray(m, dtype=float)
    if m.ndim == 2:
        m = np.broadcast_to(m, (B,) + m.shape)
    if m.ndim != 3 or m.shape[0] != B or m.shape[2] != K or m.shape[1] < 1:
        raise DomainError("members must have shape (M, K) or (B, M, K)")
    if np.any(m <= 0):
        if not hyper.get("clamp"):
            raise DomainError("member probabilities must be strictly positive (set clamp=True to floor)")
        m = np.maximum(m, CLAMP_FLOOR)
    return m


def _distillation(alpha, y, hyper):
    B, K = ad.value(alpha).shape
    mean_log = np.log(_members(hyper, B, K)).mean(axis=1)  # (B, K)
    a0 = ad.sum(alpha, axis=-1)
    data_term = ad.sum((alpha - 1.0) * mean_log, axis=-1)
    likelihood = ad.lgamma(a0) - ad.sum(ad.lgamma(alpha), axis=-1) + data_term
    av = ad.value(alpha)
    table = digamma(av.sum(-1)) - digamma(av).sum(-1) + ad.value(data_term)
    extras = {"likelihood_form": ad.value(likelihood), "table_form": table}
    form = hyper.get("form", "likelihood")
    if form == "likelihood":
        return {"nll": -likelihood}, extras
    if form == "table":
        norm = ad.digamma(a0) - ad.sum(ad.digamma(alpha), axis=-1)
        return {"nll": -(norm + data_term)}, extras
    raise DomainError(f"unknown distillation form {form!r}")


def _vacuity_reg(alpha, y, hyper):
    a0 = ad.sum(alpha, axis=-1)
    return {"vacuity": -_label_entry(alpha, y) / a0}, {}


def _dissonance_reg(alpha, y, hyper):
    return {"dissonance": batch_dissonance(alpha)}, {}


def _wrong_class_kl(alpha, y, hyper):
    B, K = ad.value(alpha).shape
    if K < 3:
        raise DomainError("wrong-class KL needs K >= 3 so the sub-vector has length >= 2")
    y = np.asarray(y, dtype=int)
    cols = np.array([[c for c in range(K) if c != yb] for yb in y])
    sub = alpha[np.arange(B)[:, None], cols]
    return {"kl": batch_kl_to_uniform(sub)}, {}


def _elbo(alpha, y, hyper):
    K = ad.value(alpha).shape[-1]
    gamma = np.asarray(hyper.get("gamma", np.ones(K)), dtype=float)
    if gamma.shape[-1] != K:
        raise DomainError("dimension mismatch between posterior and target gamma")
    if np.any(gamma <= 0):
        raise DomainError("target gamma must be positive")
    a0 = ad.sum(alpha, axis=-1)
    uce = ad.digamma(a0) - ad.digamma(_label_entry(alpha, y))
    return {"uce": uce, "kl": batch_kl(alpha, np.broadcast_to(gamma, ad.value(alpha).shape))}, {}


REGISTRY: dict[str, LossSpec] = {
    s.key: s
    for s in [
        LossSpec("uce", _uce, doc="uncertainty-aware cross-entropy psi(a0) - psi(a_y)"),
        LossSpec("ce", _ce, doc="cross-entropy of the Dirichlet mean"),
        LossSpec("l2", _l2, doc="expected squared error to the one-hot label"),
        LossSpec("lp_bound", _lp_bound, doc="closed-form bound on E||y - pi||_p"),
        LossSpec("forward_kl", _forward_kl, doc="KL from a label-smoothed target Dirichlet"),
        LossSpec("reverse_kl", _reverse_kl, doc="KL to the soft-label mixture of target rows"),
        LossSpec("renyi", _renyi, doc="local Renyi approximation on wrong-class concentrations"),
        LossSpec("kl_uniform", _kl_uniform, needs_label=False, doc="KL to the uniform Dirichlet"),
        LossSpec("entropy", _entropy_reg, needs_label=False, doc="negative differential entropy"),
        LossSpec("pac", _pac, needs_label=False, doc="PAC-bound regularizer"),
        LossSpec("rep_gap_id", _rep_gap_id, doc="representation-gap in-distribution loss"),
        LossSpec("rep_gap_ood", _rep_gap_ood, needs_label=False, doc="representation-gap OOD loss"),
        LossSpec("distillation", _distillation, needs_label=False, doc="ensemble distribution distillation"),
        LossSpec("vacuity", _vacuity_reg, doc="-a_y / a0 on OOD samples"),
        LossSpec("dissonance", _dissonance_reg, needs_label=False, doc="evidence-balance dissonance"),
        LossSpec("wrong_class_kl", _wrong_class_kl, doc="KL to uniform over the wrong classes"),
        LossSpec("elbo", _elbo, doc="UCE plus KL to a target Dirichlet"),
    ]
}


def registry_keys() -> list[str]:
    return list(REGISTRY)


def _hyper(key: str, hyper: Mapping | None) -> dict:
    out = dict(DEFAULT_HYPER.get(key, {}))
    out.update(hyper or {})
    return out


def _spec(key: str) -> LossSpec:
    try:
        return REGISTRY[key]
    except KeyError:
        raise KeyError(f"unknown loss key {key!r}; known keys: {', '.join(REGISTRY)}") from None


def batch_loss(key: str, alpha, y=None, hyper: Mapping | None = None):
    """Per-row total loss for a (B, K) batch; differentiable when ``alpha`` is tracked."""
    spec = _spec(key)
    B = _rows(alpha)
    h = _hyper(key, hyper)
    if y is None:
        if key == "reverse_kl" and h.get("ood"):
            # unlabelled OOD rows target the even mixture of all rows
            K = ad.value(alpha).shape[-1]
            h.setdefault("soft_label", np.full(K, 1.0 / K))
        elif spec.needs_label or (key == "kl_uniform" and h.get("masked")):
            raise ValueError(f"loss {key!r} needs labels")
        y = np.zeros(B, dtype=int)
    comps, _ = spec.kernel(alpha, np.asarray(y, dtype=int), h)
    total = None
    for c in comps.values():
        total = c if total is None else total + c
    return total


def evaluate(key: str, ctx: LossContext) -> LossValue:
    spec = _spec(key)
    if spec.needs_label and ctx.label is None:
        raise ValueError(f"loss {key!r} needs a label")
    y = np.array([0 if ctx.label is None else ctx.label])
    comps, extras = spec.kernel(ctx.alphas.alphas[None, :], y, _hyper(key, ctx.hyper))
    comps = {k: float(np.asarray(ad.value(v)).reshape(-1)[0]) for k, v in comps.items()}
    out_extras = {}
    for k, v in extras.items():
        v = np.asarray(v)
        out_extras[k] = float(v.reshape(-1)[0]) if v.ndim <= 1 else v[0]
    return LossValue(sum(comps.values()), comps, out_extras)


# -- single-context wrappers ------------------------------------------------------

def uce_loss(ctx: LossContext) -> LossValue:
    return evaluate("uce", ctx)


def ce_loss(ctx: LossContext) -> LossValue:
    return evaluate("ce", ctx)


def l2_loss(ctx: LossContext) -> LossValue:
    return evaluate("l2", ctx)


def lp_bound_loss(ctx: LossContext) -> LossValue:
    return evaluate("lp_bound", ctx)


def forward_kl_loss(ctx: LossContext) -> LossValue:
    return evaluate("forward_kl", ctx)


def reverse_kl_loss(ctx: LossContext) -> LossValue:
    return evaluate("reverse_kl", ctx)


def renyi_reg(ctx: LossContext) -> LossValue:
    return evaluate("renyi", ctx)


def kl_uniform_reg(ctx: LossContext, masked: bool = False) -> LossValue:
    return evaluate("kl_uniform", LossContext(ctx.alphas, ctx.label, {**ctx.hyper, "masked": masked}))


def entropy_reg(ctx: LossContext) -> LossValue:
    return evaluate("entropy", ctx)


def pac_reg(ctx: LossContext) -> LossValue:
    return evaluate("pac", ctx)


def rep_gap_losses(ctx_id: LossContext, ctx_ood: LossContext) -> tuple[LossValue, LossValue]:
    return evaluate("rep_gap_id", ctx_id), evaluate("rep_gap_ood", ctx_ood)


def distillation_loss(ctx: LossContext) -> LossValue:
    return evaluate("distillation", ctx)


def vacuity_reg(ctx: LossContext) -> LossValue:
    return evaluate("vacuity", ctx)


def dissonance_reg(ctx: LossContext) -> LossValue:
    return evaluate("dissonance", ctx)


def wrong_class_kl_reg(ctx: LossContext) -> LossValue:
    return evaluate("wrong_class_kl", ctx)


def elbo_loss(ctx: LossContext) -> LossValue:
    return evaluate("elbo", ctx)
