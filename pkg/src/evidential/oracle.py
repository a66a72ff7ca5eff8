"""Monte Carlo and quadrature estimators used to check the closed forms.

Nothing here calls into :mod:`evidential.special_fn`; densities use
``scipy.special.gammaln`` so a bug in the hand-written special functions cannot
hide behind itself.  Dirichlet draws are made in log space so that tiny
concentrations do not underflow to exact zeros.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy import integrate
from scipy.special import gammaln, xlogy

from . import dirichlet as dr
from . import losses as ls
from . import regression as rg

__all__ = [
    "MCEstimate",
    "QuadratureError",
    "DEFAULT_N",
    "Z_TOL",
    "QUAD_TOL",
    "log_dirichlet_draws",
    "mc_expected_log_prob",
    "mc_entropy",
    "mc_expected_entropy",
    "mc_mutual_information",
    "mc_kl",
    "mc_l2_loss",
    "mc_linf_check",
    "mc_uce",
    "mc_elbo",
    "quad_nig_marginal",
    "OracleRow",
    "SUITES",
    "run_suite",
    "rows_to_csv",
]

DEFAULT_N = 200_000
MIN_N = 1000
Z_TOL = 5.0
LINF_Z_TOL = 3.0
QUAD_TOL = 1e-5


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n: int
    seed: int | None

    def __post_init__(self):
        if self.n < MIN_N:
            raise ValueError(f"Monte Carlo estimates need n >= {MIN_N}")
        if not self.std_error >= 0:
            raise ValueError("standard error must be >= 0")

    def z(self, reference: float) -> float:
        diff = abs(self.mean - reference)
        if self.std_error == 0:
            return 0.0 if diff <= 1e-12 * max(1.0, abs(reference)) else math.inf
        return diff / self.std_error


def _estimate(samples: np.ndarray, seed) -> MCEstimate:
    n = samples.shape[0]
    return MCEstimate(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n)), n, seed)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _check_n(n: int):
    if n < MIN_N:
        raise ValueError(f"n must be >= {MIN_N}")


def log_dirichlet_draws(alpha, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, K) array of log pi for pi ~ Dir(alpha).

    Uses Gamma(a) = Gamma(a + 1) * U^(1/a), which keeps log-gammas finite for a < 1.
    """
    a = np.asarray(alpha, dtype=float)
    g = rng.standard_gamma(a + 1.0, size=(n, a.size))
    u = rng.random((n, a.size))
    log_g = np.log(g) + np.log1p(-u) / a
    return log_g - np.logaddexp.reduce(log_g, axis=1, keepdims=True)


def _log_density(alpha: np.ndarray, log_pi: np.ndarray) -> np.ndarray:
    return gammaln(alpha.sum()) - gammaln(alpha).sum() + log_pi @ (alpha - 1.0)


def mc_expected_log_prob(alpha, k: int, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    _check_n(n)
    lp = log_dirichlet_draws(alpha, n, _rng(seed))
    return _estimate(lp[:, k], seed)


def mc_entropy(alpha, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    """Differential entropy, -E[log p(pi)]."""
    _check_n(n)
    a = np.asarray(alpha, dtype=float)
    lp = log_dirichlet_draws(a, n, _rng(seed))
    return _estimate(-_log_density(a, lp), seed)


def mc_expected_entropy(alpha, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    _check_n(n)
    lp = log_dirichlet_draws(alpha, n, _rng(seed))
    pi = np.exp(lp)
    return _estimate(-np.sum(pi * lp, axis=1), seed)


def mc_mutual_information(alpha, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    """H[E pi] - H[pi] per draw: the total term is exact, the data term sampled."""
    _check_n(n)
    a = np.asarray(alpha, dtype=float)
    p_bar = a / a.sum()
    total = -float(np.sum(xlogy(p_bar, p_bar)))
    lp = log_dirichlet_draws(a, n, _rng(seed))
    return _estimate(total + np.sum(np.exp(lp) * lp, axis=1), seed)


def mc_kl(alpha_p, alpha_q, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    _check_n(n)
    p = np.asarray(alpha_p, dtype=float)
    q = np.asarray(alpha_q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("dimension mismatch between Dirichlets")
    lp = log_dirichlet_draws(p, n, _rng(seed))
    return _estimate(_log_density(p, lp) - _log_density(q, lp), seed)


def mc_l2_loss(alpha, y: int, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    _check_n(n)
    a = np.asarray(alpha, dtype=float)
    pi = np.exp(log_dirichlet_draws(a, n, _rng(seed)))
    onehot = np.eye(a.size)[y]
    return _estimate(np.sum((onehot - pi) ** 2, axis=1), seed)


def mc_linf_check(alpha, y: int, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    """E ||y - pi||_inf."""
    _check_n(n)
    a = np.asarray(alpha, dtype=float)
    pi = np.exp(log_dirichlet_draws(a, n, _rng(seed)))
    onehot = np.eye(a.size)[y]
    return _estimate(np.max(np.abs(onehot - pi), axis=1), seed)


def mc_uce(alpha, y: int, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    """E[-log pi_y]."""
    _check_n(n)
    lp = log_dirichlet_draws(alpha, n, _rng(seed))
    return _estimate(-lp[:, y], seed)


def mc_elbo(alpha, y: int, gamma, n: int = DEFAULT_N, seed=0) -> MCEstimate:
    """E[-log pi_y + log p(pi) - log q(pi)] under pi ~ Dir(alpha)."""
    _check_n(n)
    a = np.asarray(alpha, dtype=float)
    g = np.asarray(gamma, dtype=float)
    lp = log_dirichlet_draws(a, n, _rng(seed))
    return _estimate(-lp[:, y] + _log_density(a, lp) - _log_density(g, lp), seed)


# -- quadrature for the NIG marginal ------------------------------------------------

def quad_nig_marginal(p: rg.NIGParams, y: float, width: float = 60.0, epsabs: float = 1e-11) -> float:
    """-log of the integral of N(y; mu, s2) N(mu; gamma, s2/nu) InvGamma(s2; alpha, beta).

    The outer integral runs over log s2, the inner one over mu; both by adaptive
    quadrature.  ``width`` is the half-width of the outer range in log units.
    """
    g, nu, a, b = p.astuple()
    log_ig_norm = a * math.log(b) - gammaln(a)

    def inner(s2: float) -> float:
        sd = math.sqrt(s2)
        # centre and scale the mu axis at the product's peak; the value is unaffected
        c = (y + nu * g) / (1.0 + nu)
        w = sd / math.sqrt(1.0 + nu)

        def f(t):
            mu = c + w * t
            log_lik = -0.5 * (y - mu) ** 2 / s2 - 0.5 * math.log(2 * math.pi * s2)
            log_prior = -0.5 * nu * (mu - g) ** 2 / s2 - 0.5 * math.log(2 * math.pi * s2 / nu)
            return math.exp(log_lik + log_prior) * w

        val, _ = integrate.quad(f, -40.0, 40.0, epsabs=0.0, epsrel=1e-12, limit=200)
        return val

    def outer(u: float) -> float:
        s2 = math.exp(u)
        log_ig = log_ig_norm - (a + 1.0) * u - b / s2 + u  # includes ds2 = s2 du
        if log_ig < -745:
            return 0.0
        return inner(s2) * math.exp(log_ig)

    mode = math.log(b / (a + 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            total, _ = integrate.quad(
                outer, mode - width, mode + width, points=[mode], epsabs=epsabs, epsrel=1e-12, limit=500
            )
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"NIG marginal quadrature did not converge: {e}") from e
    if not total > 0:
        raise QuadratureError("NIG marginal quadrature returned a non-positive mass")
    return -math.log(total)


# -- suite runner -----------------------------------------------------------------------

@dataclass(frozen=True)
class OracleRow:
    """One comparison.  For quadrature rows ``mc_se`` is the absolute tolerance
    divided by ``Z_TOL`` so the same z <= 5 rule applies; for the l-inf bound
    ``z_score`` is signed (estimate above bound is positive) and the rule is z <= 3."""

    quantity: str
    closed_form: float
    mc_mean: float
    mc_se: float
    z_score: float
    passed: bool


def _random_alpha(rng: np.random.Generator, K: int | None = None) -> np.ndarray:
    K = int(rng.integers(2, 7)) if K is None else K
    return np.exp(rng.uniform(math.log(0.3), math.log(30.0), K))


def _mc_row(name: str, closed: float, est: MCEstimate) -> OracleRow:
    z = est.z(closed)
    return OracleRow(name, closed, est.mean, est.std_error, z, z <= Z_TOL)


def _cases(seed: int, label: str, n_cases: int) -> Iterator[tuple[int, np.random.Generator, int]]:
    # Each case owns an independent stream keyed by (seed, quantity, case).
    tag = sum(ord(c) * 131**i for i, c in enumerate(label)) % (2**31)
    for i in range(n_cases):
        rng = np.random.default_rng([seed, tag, i])
        yield i, rng, int(rng.integers(2**31))


def _dirichlet_rows(n: int, seed: int, n_cases: int) -> list[OracleRow]:
    rows = []
    for i, rng, s in _cases(seed, "mean", n_cases):
        a = _random_alpha(rng)
        pi = np.exp(log_dirichlet_draws(a, n, np.random.default_rng(s)))
        k = int(rng.integers(a.size))
        est = _estimate(pi[:, k], s)
        rows.append(_mc_row(f"mean:{i:03d}", float(dr.mean(dr.DirichletParams(a)).probs[k]), est))
    for i, rng, s in _cases(seed, "expected_log_prob", n_cases):
        a = _random_alpha(rng)
        k = int(rng.integers(a.size))
        rows.append(_mc_row(f"expected_log_prob:{i:03d}",
                            dr.expected_log_prob(dr.DirichletParams(a), k), mc_expected_log_prob(a, k, n, s)))
    for i, rng, s in _cases(seed, "entropy", n_cases):
        a = _random_alpha(rng)
        rows.append(_mc_row(f"entropy:{i:03d}", dr.differential_entropy(dr.DirichletParams(a)), mc_entropy(a, n, s)))
    for i, rng, s in _cases(seed, "kl", n_cases):
        a, b = _random_alpha(rng), None
        b = _random_alpha(rng, a.size)
        rows.append(_mc_row(f"kl:{i:03d}", dr.kl_divergence(dr.DirichletParams(a), dr.DirichletParams(b)),
                            mc_kl(a, b, n, s)))
    for i, rng, s in _cases(seed, "expected_entropy", n_cases):
        a = _random_alpha(rng)
        rows.append(_mc_row(f"expected_entropy:{i:03d}",
                            dr.expected_categorical_entropy(dr.DirichletParams(a)), mc_expected_entropy(a, n, s)))
    for i, rng, s in _cases(seed, "mutual_information", n_cases):
        a = _random_alpha(rng)
        rows.append(_mc_row(f"mutual_information:{i:03d}",
                            dr.mutual_information(dr.DirichletParams(a)), mc_mutual_information(a, n, s)))
    return rows


def _loss_rows(n: int, seed: int, n_cases: int) -> list[OracleRow]:
    rows = []
    for i, rng, s in _cases(seed, "l2", n_cases):
        a = _random_alpha(rng)
        y = int(rng.integers(a.size))
        rows.append(_mc_row(f"l2:{i:03d}", ls.l2_loss(ls.LossContext(a, y)).value, mc_l2_loss(a, y, n, s)))
    for i, rng, s in _cases(seed, "uce", n_cases):
        a = _random_alpha(rng)
        y = int(rng.integers(a.size))
        rows.append(_mc_row(f"uce:{i:03d}", ls.uce_loss(ls.LossContext(a, y)).value, mc_uce(a, y, n, s)))
    for i, rng, s in _cases(seed, "elbo", n_cases):
        a = _random_alpha(rng)
        g = _random_alpha(rng, a.size)
        y = int(rng.integers(a.size))
        closed = ls.elbo_loss(ls.LossContext(a, y, {"gamma": g})).value
        rows.append(_mc_row(f"elbo:{i:03d}", closed, mc_elbo(a, y, g, n, s)))
    rows.extend(linf_bound_rows(n, seed, n_cases))
    return rows


def linf_bound_rows(n: int, seed: int, n_cases: int) -> list[OracleRow]:
    rows = []
    for i, rng, s in _cases(seed, "linf_bound", n_cases):
        K = (2, 3, 5)[i % 3]
        a = _random_alpha(rng, K)
        y = int(rng.integers(K))
        p = float(rng.choice([1.0, 2.0, 3.0, 4.0]))
        bound = ls.lp_bound_loss(ls.LossContext(a, y, {"p": p})).value
        est = mc_linf_check(a, y, n, s)
        z = (est.mean - bound) / est.std_error if est.std_error > 0 else (0.0 if est.mean <= bound else math.inf)
        rows.append(OracleRow(f"linf_bound:p={p:g}:{i:03d}", bound, est.mean, est.std_error, z, z <= LINF_Z_TOL))
    return rows


def random_nig(rng: np.random.Generator) -> tuple[rg.NIGParams, float]:
    p = rg.NIGParams(
        float(rng.uniform(-2, 2)),
        float(np.exp(rng.uniform(math.log(0.1), math.log(10.0)))),
        float(rng.uniform(1.1, 8.0)),
        float(np.exp(rng.uniform(math.log(0.1), math.log(5.0)))),
    )
    y = p.gamma + float(rng.normal(0.0, 2.0))
    return p, y


def _regression_rows(n: int, seed: int, n_cases: int) -> list[OracleRow]:
    rows = []
    for i, rng, _ in _cases(seed, "nig_nll", n_cases):
        p, y = random_nig(rng)
        closed = rg.nig_nll(p, y)
        quad = quad_nig_marginal(p, y)
        se = QUAD_TOL / Z_TOL
        z = abs(closed - quad) / se
        rows.append(OracleRow(f"nig_nll:{i:03d}", closed, quad, se, z, z <= Z_TOL))
    return rows


SUITES: dict[str, Callable[[int, int, int], list[OracleRow]]] = {
    "dirichlet": _dirichlet_rows,
    "losses": _loss_rows,
    "regression": _regression_rows,
}


def run_suite(name: str = "all", n: int = DEFAULT_N, seed: int = 0, n_cases: int = 50) -> list[OracleRow]:
    if name != "all" and name not in SUITES:
        raise KeyError(f"unknown oracle suite {name!r}; known: all, {', '.join(SUITES)}")
    _check_n(n)
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](n, seed, n_cases)]
    return SUITES[name](n, seed, n_cases)


def rows_to_csv(rows: list[OracleRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "closed_form", "mc_mean", "mc_se", "z_score", "pass"])
    for r in rows:
        w.writerow([r.quantity, repr(r.closed_form), repr(r.mc_mean), repr(r.mc_se), f"{r.z_score:.6f}",
                    "true" if r.passed else "false"])
    return buf.getvalue()
