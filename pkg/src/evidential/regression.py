"""Univariate deep evidential regression with a Normal-Inverse-Gamma prior.

The NIG(gamma, nu, alpha, beta) prior places mu ~ N(gamma, sigma^2 / nu) and
sigma^2 ~ InvGamma(alpha, beta).  Its marginal likelihood is a Student-t, which
gives the closed-form negative log-likelihood used for training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import autodiff as ad
from .losses import LossValue
from .special_fn import DomainError, digamma, log_gamma

__all__ = [
    "NIGParams",
    "predict",
    "uncertainty_decomposition",
    "nig_nll",
    "evidential_reg",
    "uncertainty_thresholds",
    "lipschitz_mse",
    "total_der_loss",
    "nig_from_raw",
    "REGRESSION_LOSSES",
    "batch_regression_loss",
]

POSITIVE_FLOOR = 1e-12


@dataclass(frozen=True)
class NIGParams:
    """NIG parameters.  ``alpha > 1`` is only required for the variance moments."""

    gamma: float
    nu: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("gamma", "nu", "alpha", "beta"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.nu <= 0 or self.alpha <= 0 or self.beta <= 0:
            raise DomainError("NIG requires nu > 0, alpha > 0, beta > 0")

    def astuple(self):
        return self.gamma, self.nu, self.alpha, self.beta


# -- batched kernels -----------------------------------------------------------

def batch_nll(gamma, nu, alpha, beta, y):
    omega = 2.0 * beta * (1.0 + nu)
    resid = y - gamma
    return (
        0.5 * ad.log(math.pi / nu)
        - alpha * ad.log(omega)
        + (alpha + 0.5) * ad.log(resid * resid * nu + omega)
        + ad.lgamma(alpha)
        - ad.lgamma(alpha + 0.5)
    )


def batch_reg(gamma, nu, alpha, beta, y):
    return ad.abs(y - gamma) * (2.0 * nu + alpha)


def batch_thresholds(nu, alpha, beta):
    u_nu = beta * (nu + 1.0) / (alpha * nu)
    u_alpha = 2.0 * beta * (nu + 1.0) / nu * (ad.exp(ad.digamma(alpha + 0.5) - ad.digamma(alpha)) - 1.0)
    return u_nu, u_alpha


def batch_lipschitz_mse(gamma, nu, alpha, beta, y, batch_min: bool = False):
    u_nu, u_alpha = batch_thresholds(nu, alpha, beta)
    u = ad.minimum(u_nu, u_alpha)
    if batch_min:
        # One threshold for the whole mini-batch.
        j = int(np.argmin(ad.value(u)))
        u = u[j] * np.ones(ad.value(u).shape)
    resid = y - gamma
    sq = resid * resid
    inside = ad.value(sq) < ad.value(u)
    linear = 2.0 * ad.sqrt(u) * ad.abs(resid) - u
    return ad.where(inside, sq, linear)


# -- public API ------------------------------------------------------------------

def predict(p: NIGParams) -> float:
    return p.gamma


def uncertainty_decomposition(p: NIGParams) -> tuple[float, float]:
    """(aleatoric, epistemic) = (E[sigma^2], Var[mu])."""
    if p.alpha <= 1:
        raise DomainError("E[sigma^2] and Var[mu] are undefined for alpha <= 1")
    aleatoric = p.beta / (p.alpha - 1.0)
    return aleatoric, aleatoric / p.nu


def nig_nll(p: NIGParams, y: float) -> float:
    return float(batch_nll(*p.astuple(), y))


def evidential_reg(p: NIGParams, y: float) -> float:
    return float(batch_reg(*p.astuple(), y))


def uncertainty_thresholds(p: NIGParams) -> tuple[float, float]:
    """(U_nu, U_alpha); the Lipschitz threshold is their minimum."""
    u_nu = p.beta * (p.nu + 1.0) / (p.alpha * p.nu)
    u_alpha = 2.0 * p.beta * (p.nu + 1.0) / p.nu * (
        math.exp(digamma(p.alpha + 0.5) - digamma(p.alpha)) - 1.0
    )
    return u_nu, u_alpha


def lipschitz_mse(p: NIGParams, y: float) -> float:
    return float(batch_lipschitz_mse(*p.astuple(), y))


def total_der_loss(p: NIGParams, y: float, lam: float = 0.0, use_mt: bool = False) -> LossValue:
    if lam < 0:
        raise DomainError("regularizer weight must be >= 0")
    comps = {"nll": nig_nll(p, y), "reg": lam * evidential_reg(p, y)}
    if use_mt:
        comps["mse"] = lipschitz_mse(p, y)
    return LossValue(sum(comps.values()), comps, {"U": min(uncertainty_thresholds(p))})


def student_t_nll(p: NIGParams, y: float) -> float:
    """The same marginal written as a location-scale Student-t, used as a cross-check."""
    df = 2.0 * p.alpha
    scale2 = p.beta * (1.0 + p.nu) / (p.nu * p.alpha)
    z2 = (y - p.gamma) ** 2 / scale2
    return float(
        -log_gamma((df + 1) / 2)
        + log_gamma(df / 2)
        + 0.5 * math.log(df * math.pi * scale2)
        + (df + 1) / 2 * math.log1p(z2 / df)
    )


# -- network head and registry ------------------------------------------------------

def nig_from_raw(raw):
    """Map unconstrained (B, 4) outputs to (gamma, nu, alpha, beta) with softplus."""
    gamma = raw[:, 0]
    nu = ad.softplus(raw[:, 1]) + POSITIVE_FLOOR
    alpha = ad.softplus(raw[:, 2]) + 1.0 + POSITIVE_FLOOR
    beta = ad.softplus(raw[:, 3]) + POSITIVE_FLOOR
    return gamma, nu, alpha, beta


def _total(gamma, nu, alpha, beta, y, hyper):
    out = batch_nll(gamma, nu, alpha, beta, y) + float(hyper.get("lam", 0.0)) * batch_reg(gamma, nu, alpha, beta, y)
    if hyper.get("use_mt"):
        out = out + batch_lipschitz_mse(gamma, nu, alpha, beta, y, bool(hyper.get("batch_min", False)))
    return out


REGRESSION_LOSSES: dict[str, Callable] = {
    "der_nll": lambda g, n, a, b, y, h: batch_nll(g, n, a, b, y),
    "der_reg": lambda g, n, a, b, y, h: batch_reg(g, n, a, b, y),
    "der_mse": lambda g, n, a, b, y, h: batch_lipschitz_mse(g, n, a, b, y, bool(h.get("batch_min", False))),
    "der_total": _total,
}


def batch_regression_loss(key: str, gamma, nu, alpha, beta, y, hyper: Mapping | None = None):
    try:
        fn = REGRESSION_LOSSES[key]
    except KeyError:
        raise KeyError(f"unknown regression loss {key!r}; known keys: {', '.join(REGRESSION_LOSSES)}") from None
    return fn(gamma, nu, alpha, beta, y, dict(hyper or {}))
