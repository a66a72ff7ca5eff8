"""Density-weighted posterior updates.

A Gaussian kernel density estimate over latent vectors plays the role of the
per-class normalizing flows: where it assigns low density the update falls
back to the prior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .dirichlet import DirichletParams
from .special_fn import DomainError

__all__ = [
    "ExpFamParams",
    "DensityModel",
    "DegenerateUpdateError",
    "posterior_net_update",
    "natpn_update",
    "certainty_budget",
    "kde_log_density",
    "natpn_regression_map",
    "natpn_regression_inverse",
    "scott_bandwidth",
]


class DegenerateUpdateError(ValueError):
    """Both prior and observation carry zero evidence."""


@dataclass(frozen=True)
class ExpFamParams:
    chi: np.ndarray
    n: float

    def __post_init__(self):
        chi = np.array(self.chi, dtype=float).reshape(-1)
        if not np.all(np.isfinite(chi)):
            raise DomainError("chi must be finite")
        n = float(self.n)
        if not math.isfinite(n) or n < 0:
            raise DomainError("evidence n must be finite and >= 0")
        chi.setflags(write=False)
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "n", n)


def scott_bandwidth(n: int, dim: int, spread: float) -> float:
    """Scott's rule, h = spread * n^(-1/(d+4))."""
    return float(spread) * n ** (-1.0 / (dim + 4))


@dataclass(frozen=True)
class DensityModel:
    """Isotropic Gaussian KDE, optionally split by class.

    ``latents`` is (n, d); ``labels`` is (n,) or None for a pooled model.
    """

    latents: np.ndarray
    labels: np.ndarray | None = None
    bandwidth: float | None = None
    n_classes: int | None = None
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        z = np.array(self.latents, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.ndim != 2 or z.shape[0] == 0:
            raise DomainError("latents must be a non-empty (n, d) array")
        if not np.all(np.isfinite(z)):
            raise DomainError("latents must be finite")
        h = self.bandwidth
        if h is None:
            spread = float(np.mean(np.std(z, axis=0))) if z.shape[0] > 1 else 1.0
            h = scott_bandwidth(z.shape[0], z.shape[1], spread if spread > 0 else 1.0)
        h = float(h)
        if not h > 0:
            raise DomainError("bandwidth must be > 0")
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=int).reshape(-1)
            if y.shape[0] != z.shape[0]:
                raise DomainError("labels and latents differ in length")
            K = int(self.n_classes) if self.n_classes is not None else int(y.max()) + 1
            counts = np.bincount(y, minlength=K).astype(float)
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)
            object.__setattr__(self, "n_classes", K)
        else:
            counts = np.array([float(z.shape[0])])
        z.setflags(write=False)
        object.__setattr__(self, "latents", z)
        object.__setattr__(self, "bandwidth", h)
        object.__setattr__(self, "counts", counts)

    @property
    def dim(self) -> int:
        return self.latents.shape[1]

    def log_density(self, z, k: int | None = None) -> np.ndarray:
        """Log density at each row of ``z``; class-conditional when ``k`` is given."""
        q = np.atleast_2d(np.asarray(z, dtype=float))
        if q.shape[1] != self.dim:
            raise DomainError(f"query has dimension {q.shape[1]}, model has {self.dim}")
        if not np.all(np.isfinite(q)):
            raise DomainError("query must be finite")
        pts = self.latents
        if k is not None:
            if self.labels is None:
                raise DomainError("pooled model has no class-conditional density")
            if not 0 <= k < self.n_classes:
                raise IndexError(f"class index {k} out of range")
            pts = pts[self.labels == k]
            if pts.shape[0] == 0:
                return np.full(q.shape[0], -np.inf)
        h = self.bandwidth
        d2 = ((q[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
        log_kernel = -0.5 * d2 / (h * h) - self.dim * (math.log(h) + 0.5 * math.log(2 * math.pi))
        return logsumexp(log_kernel, axis=1) - math.log(pts.shape[0])

    def class_densities(self, z) -> np.ndarray:
        """(n, K) matrix of p(z | y=k)."""
        if self.labels is None:
            raise DomainError("pooled model has no class-conditional density")
        return np.stack([np.exp(self.log_density(z, k)) for k in range(self.n_classes)], axis=1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "kde",
                "bandwidth": self.bandwidth,
                "n_classes": self.n_classes,
                "shape": list(self.latents.shape),
                "latents": self.latents.reshape(-1).tolist(),
                "labels": None if self.labels is None else self.labels.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> DensityModel:
        obj = json.loads(text)
        if obj.get("kind") != "kde":
            raise ValueError("not a serialized density model")
        z = np.asarray(obj["latents"], dtype=float).reshape(obj["shape"])
        return cls(z, obj["labels"], obj["bandwidth"], obj["n_classes"])


def kde_log_density(model: DensityModel | None, z, k: int | None = None) -> float:
    if model is None:
        raise DomainError("density model has not been fitted")
    return float(model.log_density(np.asarray(z, dtype=float).reshape(1, -1), k)[0])


def posterior_net_update(prior: DirichletParams, class_counts, class_densities) -> DirichletParams:
    """beta_k = alpha_k + N_k * p(z | y=k)."""
    n = np.asarray(class_counts, dtype=float)
    dens = np.asarray(class_densities, dtype=float)
    if n.shape != prior.alphas.shape or dens.shape != prior.alphas.shape:
        raise DomainError("dimension mismatch: counts, densities and prior must all have length K")
    if np.any(dens < 0) or np.any(n < 0):
        raise DomainError("counts and densities must be non-negative")
    return DirichletParams(prior.alphas + n * dens)


def natpn_update(prior: ExpFamParams, pseudo: ExpFamParams) -> ExpFamParams:
    """Evidence-weighted average of parameter vectors; evidences add."""
    if prior.chi.shape != pseudo.chi.shape:
        raise DomainError("dimension mismatch between parameter vectors")
    n = prior.n + pseudo.n
    if n <= 0:
        raise DegenerateUpdateError("cannot update when both evidences are zero")
    if pseudo.n == 0:
        return ExpFamParams(prior.chi.copy(), n)
    return ExpFamParams((prior.n * prior.chi + pseudo.n * pseudo.chi) / n, n)


def certainty_budget(latent_dim: int, n_data: int | None = None) -> float:
    """exp(0.5 (H log 2pi + log(H + 1))), or the dataset size when ``n_data`` is given."""
    H = int(latent_dim)
    if H < 1 or H != latent_dim:
        raise DomainError("latent dimension must be an integer >= 1")
    if n_data is not None:
        if n_data < 1:
            raise DomainError("dataset size must be >= 1")
        return float(n_data)
    return math.exp(0.5 * (H * math.log(2 * math.pi) + math.log(H + 1)))


def natpn_regression_map(mu0: float, alpha: float, beta: float) -> ExpFamParams:
    """Normal-inverse-gamma target as (chi, n) with n = 2 alpha, chi = (mu0, mu0^2 + beta / alpha)."""
    if not alpha > 0 or not beta > 0:
        raise DomainError("alpha and beta must be > 0")
    return ExpFamParams(np.array([mu0, mu0 * mu0 + beta / alpha]), 2.0 * alpha)


def natpn_regression_inverse(p: ExpFamParams) -> tuple[float, float, float]:
    if p.chi.shape != (2,) or p.n <= 0:
        raise DomainError("expected a 2-vector chi and positive evidence")
    mu0 = float(p.chi[0])
    alpha = p.n / 2.0
    beta = (float(p.chi[1]) - mu0 * mu0) * alpha
    if beta <= 0:
        raise DomainError("chi does not map back to a positive beta")
    return mu0, alpha, beta
