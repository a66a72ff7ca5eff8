"""Dirichlet distribution: closed-form moments, entropies, divergences, updates.

Two layers live here.  The ``batch_*`` kernels work on the last axis of an
array (or :class:`~evidential.autodiff.Tensor`) of concentrations and are what
the losses and the trainer differentiate.  The public functions below them
take :class:`DirichletParams` and return plain floats.

Class indices are 0-based.  Entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .special_fn import DomainError, log_beta_fn

__all__ = [
    "DirichletParams",
    "CategoricalDist",
    "UncertaintyReport",
    "mean",
    "variance",
    "log_pdf",
    "sample",
    "expected_log_prob",
    "differential_entropy",
    "expected_categorical_entropy",
    "shannon_entropy",
    "mutual_information",
    "kl_divergence",
    "kl_to_uniform",
    "conjugate_update",
    "dissonance",
    "uncertainty_report",
]


@dataclass(frozen=True)
class DirichletParams:
    """Concentrations alpha_1..alpha_K.

    A posterior built by :func:`conjugate_update` also remembers the prior it
    started from and the total counts added so far, so that ``alphas`` is always
    one rounding away from ``prior + counts`` however the counts arrived.
    """

    alphas: np.ndarray
    prior: np.ndarray | None = field(default=None, repr=False, compare=False)
    counts: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.alphas, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise DomainError("a Dirichlet needs a concentration vector with K >= 2")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise DomainError("concentration parameters must be finite and > 0")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)
        if (self.prior is None) != (self.counts is None):
            raise DomainError("prior and counts must be given together")
        for name in ("prior", "counts"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v)
                if v.shape != a.shape:
                    raise DomainError(f"{name} must have length K")
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    @property
    def K(self) -> int:
        return self.alphas.size

    @property
    def precision(self) -> float:
        return float(self.alphas.sum())

    def __len__(self):
        return self.K


@dataclass(frozen=True)
class CategoricalDist:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-9:
            raise DomainError("probabilities must lie in [0, 1] and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class UncertaintyReport:
    expected_entropy: float
    mutual_information: float
    total_entropy: float
    max_alpha: float
    precision: float
    vacuity: float
    dissonance: float


def _as_alphas(d) -> np.ndarray:
    return d.alphas if isinstance(d, DirichletParams) else DirichletParams(d).alphas


def _check_index(d: DirichletParams, k: int):
    if not 0 <= k < d.K:
        raise IndexError(f"class index {k} out of range for K={d.K}")


# -- batched kernels (last axis = classes) -------------------------------------

def batch_log_beta(alpha):
    return ad.sum(ad.lgamma(alpha), axis=-1) - ad.lgamma(ad.sum(alpha, axis=-1))


def batch_expected_log_prob(alpha):
    """E[log pi_k] for every k."""
    a0 = ad.sum(alpha, axis=-1, keepdims=True)
    return ad.digamma(alpha) - ad.digamma(a0)


def batch_entropy(alpha):
    """Differential entropy of Dir(alpha)."""
    K = ad.value(alpha).shape[-1]
    a0 = ad.sum(alpha, axis=-1)
    return (
        batch_log_beta(alpha)
        + (a0 - K) * ad.digamma(a0)
        - ad.sum((alpha - 1.0) * ad.digamma(alpha), axis=-1)
    )


def batch_expected_entropy(alpha):
    """Expected Shannon entropy of the categorical, E_Dir[H[Cat(pi)]]."""
    a0 = ad.sum(alpha, axis=-1, keepdims=True)
    probs = alpha / a0
    return -ad.sum(probs * (ad.digamma(alpha + 1.0) - ad.digamma(a0 + 1.0)), axis=-1)


def batch_mutual_information(alpha):
    a0 = ad.sum(alpha, axis=-1, keepdims=True)
    probs = alpha / a0
    return -ad.sum(
        probs * (ad.log(probs) - ad.digamma(alpha + 1.0) + ad.digamma(a0 + 1.0)),
        axis=-1,
    )


def batch_kl(p, q):
    """KL[Dir(p) || Dir(q)] = log B(q) - log B(p) + sum (p_k - q_k)(psi(p_k) - psi(p_0))."""
    return (
        batch_log_beta(q)
        - batch_log_beta(p)
        + ad.sum((p - q) * batch_expected_log_prob(p), axis=-1)
    )


def batch_kl_to_uniform(alpha):
    return batch_kl(alpha, np.ones(ad.value(alpha).shape))


def batch_dissonance(alpha):
    """Evidence-balance sum, summed over k of
    a_k * sum_{k' != k} a_k' Bal(k, k') / sum_{k' != k} a_k'."""
    a = ad.value(alpha)
    K = a.shape[-1]
    lead = a.shape[:-1]
    col = ad.reshape(alpha, lead + (K, 1))
    row = ad.reshape(alpha, lead + (1, K))
    off = 1.0 - np.eye(K)
    bal = 1.0 - ad.abs(row - col) / (row + col)
    num = ad.sum(off * row * bal, axis=-1)
    den = ad.sum(off * row, axis=-1)
    return ad.sum(alpha * num / den, axis=-1)


# -- public API on DirichletParams ----------------------------------------------

def mean(d: DirichletParams) -> CategoricalDist:
    a = _as_alphas(d)
    return CategoricalDist(a / a.sum())


def variance(d: DirichletParams, k: int) -> float:
    _check_index(d, k)
    a, a0 = d.alphas[k], d.precision
    return float(a * (a0 - a) / (a0 * a0 * (a0 + 1.0)))


def log_pdf(d: DirichletParams, pi) -> float:
    """Log density at ``pi``.

    On the simplex boundary the limit convention applies: a zero coordinate
    with alpha_k = 1 contributes nothing, with alpha_k > 1 gives -inf, and
    with alpha_k < 1 the density diverges (+inf).
    """
    p = pi.probs if isinstance(pi, CategoricalDist) else np.asarray(pi, dtype=float)
    if p.shape != d.alphas.shape:
        raise DomainError("dimension mismatch between pi and alphas")
    a = d.alphas
    zero = p <= 0.0
    if np.any(zero & (a < 1.0)):
        return float("inf")
    if np.any(zero & (a > 1.0)):
        return float("-inf")
    with np.errstate(divide="ignore"):
        terms = np.where(zero, 0.0, (a - 1.0) * np.log(np.where(zero, 1.0, p)))
    return float(-log_beta_fn(a) + terms.sum())


def sample(d: DirichletParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` draws as an (n, K) array, via normalised Gamma variates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng.standard_gamma(d.alphas, size=(n, d.K))
    return g / g.sum(axis=1, keepdims=True)


def expected_log_prob(d: DirichletParams, k: int) -> float:
    _check_index(d, k)
    return float(batch_expected_log_prob(d.alphas)[k])


def differential_entropy(d: DirichletParams) -> float:
    return float(batch_entropy(d.alphas))


def expected_categorical_entropy(d: DirichletParams) -> float:
    return float(batch_expected_entropy(d.alphas))


def shannon_entropy(p) -> float:
    probs = p.probs if isinstance(p, CategoricalDist) else np.asarray(p, dtype=float)
    nz = probs[probs > 0]
    return float(-np.sum(nz * np.log(nz)))


def mutual_information(d: DirichletParams) -> float:
    return float(batch_mutual_information(d.alphas))


def kl_divergence(p: DirichletParams, q: DirichletParams) -> float:
    if p.K != q.K:
        raise DomainError("dimension mismatch between Dirichlets")
    return float(batch_kl(p.alphas, q.alphas))


def kl_to_uniform(d: DirichletParams) -> float:
    return float(batch_kl_to_uniform(d.alphas))


def conjugate_update(prior: DirichletParams, counts) -> DirichletParams:
    """Posterior after observing class counts: beta_k = alpha_k + N_k."""
    c = np.asarray(counts)
    if c.shape != prior.alphas.shape:
        raise DomainError("dimension mismatch between prior and counts")
    if np.any(c < 0):
        raise DomainError("counts must be non-negative")
    if prior.prior is None:
        base, total = prior.alphas, c
    else:
        # integer counts accumulate exactly, so sequential and batched updates agree bitwise
        base, total = prior.prior, prior.counts + c
    return DirichletParams(base + total, base, total)


def dissonance(d: DirichletParams) -> float:
    return float(batch_dissonance(d.alphas))


def uncertainty_report(d: DirichletParams) -> UncertaintyReport:
    ee = expected_categorical_entropy(d)
    mi = mutual_information(d)
    return UncertaintyReport(
        expected_entropy=ee,
        mutual_information=mi,
        total_entropy=shannon_entropy(mean(d)),
        max_alpha=float(d.alphas.max()),
        precision=d.precision,
        vacuity=d.K / d.precision,
        dissonance=dissonance(d),
    )
