import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evidential import autodiff as ad
from evidential import oracle
from evidential import regression as rg
from evidential.regression import NIGParams as P
from evidential.special_fn import DomainError

pos = st.floats(min_value=0.05, max_value=20.0)
nig_st = st.builds(P, st.floats(-5, 5), pos, st.floats(min_value=1.05, max_value=20.0), pos)


@pytest.mark.parametrize("bad", [(0, 0, 1, 1), (0, 1, 0, 1), (0, 1, 1, -1), (math.nan, 1, 1, 1), (0, math.inf, 2, 1)])
def test_params_validation(bad):
    with pytest.raises(DomainError):
        P(*bad)


def test_predict():
    assert rg.predict(P(1.5, 3, 2, 7)) == 1.5
    assert rg.predict(P(1.5, 0.1, 9, 0.2)) == 1.5
    assert rg.predict(P(0.0, 1, 2, 1)) == 0.0


def test_uncertainty_decomposition_examples():
    assert rg.uncertainty_decomposition(P(0, 1, 2, 1)) == (1.0, 1.0)
    assert rg.uncertainty_decomposition(P(0, 2, 3, 4)) == (2.0, 1.0)
    ale, epi = rg.uncertainty_decomposition(P(0, 1e9, 3, 4))
    assert ale == 2.0 and epi < 1e-8
    with pytest.raises(DomainError):
        rg.uncertainty_decomposition(P(0, 1, 1, 1))


@given(nig_st)
def test_epistemic_below_aleatoric_iff_nu_above_one(p):
    ale, epi = rg.uncertainty_decomposition(p)
    if p.nu != 1.0:
        assert (epi < ale) == (p.nu > 1)


def test_nll_matches_quadrature():
    rng = np.random.default_rng(8)
    for _ in range(20):
        p, y = oracle.random_nig(rng)
        assert rg.nig_nll(p, y) == pytest.approx(oracle.quad_nig_marginal(p, y), abs=1e-5)


def test_nll_matches_scipy_student_t():
    from scipy.stats import t

    p = P(0.3, 2.0, 3.5, 1.7)
    scale = math.sqrt(p.beta * (1 + p.nu) / (p.nu * p.alpha))
    for y in (-3.0, 0.3, 1.1, 8.0):
        want = -t.logpdf(y, df=2 * p.alpha, loc=p.gamma, scale=scale)
        assert rg.nig_nll(p, y) == pytest.approx(want, rel=1e-12)
        assert rg.student_t_nll(p, y) == pytest.approx(want, rel=1e-12)


@given(nig_st, st.floats(0.01, 10))
def test_nll_symmetric_and_minimised_at_gamma(p, d):
    up, down = rg.nig_nll(p, p.gamma + d), rg.nig_nll(p, p.gamma - d)
    assert up == pytest.approx(down, rel=1e-10, abs=1e-10)
    assert rg.nig_nll(p, p.gamma) < up


def test_evidential_reg_examples():
    assert rg.evidential_reg(P(2.0, 1, 2, 1), 2.0) == 0.0
    assert rg.evidential_reg(P(0.0, 1, 2, 1), 1.0) == 4.0
    assert rg.evidential_reg(P(0.0, 1, 2, 1), -3.0) == pytest.approx(3 * rg.evidential_reg(P(0.0, 1, 2, 1), 1.0))


def test_thresholds_at_unit_parameters():
    u_nu, u_alpha = rg.uncertainty_thresholds(P(0, 1, 1, 1))
    assert u_nu == pytest.approx(2.0, abs=1e-14)
    # exp(psi(1.5) - psi(1)) = exp(2 - 2 ln 2) = e^2 / 4
    assert u_alpha == pytest.approx(4 * (math.exp(2) / 4 - 1), rel=1e-13)
    assert u_alpha == pytest.approx(3.3888, abs=1e-3)


@given(pos, st.floats(min_value=0.2, max_value=20.0), pos, st.floats(0.1, 10))
def test_thresholds_positive_and_linear_in_beta(nu, alpha, beta, c):
    a = rg.uncertainty_thresholds(P(0, nu, alpha, beta))
    b = rg.uncertainty_thresholds(P(0, nu, alpha, c * beta))
    assert a[0] > 0 and a[1] > 0
    np.testing.assert_allclose(b, np.multiply(a, c), rtol=1e-12)


def test_lipschitz_mse_branches():
    p = P(0.0, 1, 1, 1)
    U = min(rg.uncertainty_thresholds(p))
    assert U == 2.0
    assert rg.lipschitz_mse(p, 0.0) == 0.0
    assert rg.lipschitz_mse(p, 1.0) == 1.0
    assert rg.lipschitz_mse(p, 2 * math.sqrt(U)) == pytest.approx(3 * U, rel=1e-14)
    r = math.sqrt(U)
    inside = r * r
    outside = 2 * math.sqrt(U) * r - U
    assert abs(inside - outside) <= 1e-12
    lo, hi = rg.lipschitz_mse(p, np.nextafter(r, 0)), rg.lipschitz_mse(p, np.nextafter(r, 10))
    assert abs(lo - hi) <= 1e-12 and abs(rg.lipschitz_mse(p, r) - U) <= 1e-12


@given(nig_st)
def test_lipschitz_mse_slope_bounded(p):
    U = min(rg.uncertainty_thresholds(p))
    bound = 2 * math.sqrt(U)
    r = np.linspace(-6 * math.sqrt(U), 6 * math.sqrt(U), 301)
    g = ad.Tensor(np.full(r.shape, p.gamma), track=True)
    with ad.Tape() as tape:
        out = ad.sum(rg.batch_lipschitz_mse(g, p.nu, p.alpha, p.beta, p.gamma + r))
    grad = ad.backward(tape, out)[g]
    assert np.max(np.abs(grad)) <= bound * (1 + 1e-12)


def test_batch_min_threshold_shared():
    g = np.zeros(3)
    nu = np.array([1.0, 10.0, 0.5])
    a = np.array([1.5, 3.0, 2.0])
    b = np.array([1.0, 2.0, 0.3])
    y = np.array([5.0, 5.0, 5.0])
    shared = rg.batch_lipschitz_mse(g, nu, a, b, y, batch_min=True)
    U = np.min(np.minimum(*rg.batch_thresholds(nu, a, b)))
    np.testing.assert_allclose(shared, 2 * math.sqrt(U) * 5.0 - U)


def test_total_loss_bookkeeping():
    p = P(0.2, 1.3, 2.1, 0.7)
    assert rg.total_der_loss(p, 1.0).value == rg.nig_nll(p, 1.0)
    v = rg.total_der_loss(p, 1.0, lam=0.1, use_mt=True)
    assert set(v.components) == {"nll", "reg", "mse"}
    assert v.value == sum(v.components.values())
    assert v.components["reg"] == pytest.approx(0.1 * rg.evidential_reg(p, 1.0))
    assert v.extras["U"] == min(rg.uncertainty_thresholds(p))
    with pytest.raises(DomainError):
        rg.total_der_loss(p, 1.0, lam=-1)


def test_head_maps_into_domain():
    raw = np.array([[0.3, -40.0, -40.0, -40.0], [1.0, 3.0, 0.0, 50.0]])
    g, nu, a, b = rg.nig_from_raw(raw)
    assert np.all(nu > 0) and np.all(a > 1) and np.all(b > 0)
    np.testing.assert_array_equal(g, [0.3, 1.0])


@pytest.mark.parametrize("key,hyper", [
    ("der_nll", {}), ("der_reg", {}), ("der_mse", {}), ("der_total", {"lam": 0.01, "use_mt": True}),
    ("der_total", {"lam": 0.5}),
])
def test_gradients_through_softplus_head(key, hyper):
    rng = np.random.default_rng(17)
    for _ in range(20):
        raw = rng.normal(0, 1.5, (1, 4))
        y = rng.normal(0, 2, 1)

        def f(r):
            return ad.sum(rg.batch_regression_loss(key, *rg.nig_from_raw(r), y, hyper))

        rep = ad.grad_check(f, [raw])
        assert rep.passed, (key, raw, y, rep.max_deviation)


def test_unknown_regression_key():
    with pytest.raises(KeyError, match="der_nope"):
        rg.batch_regression_loss("der_nope", 0, 1, 2, 1, 0)
