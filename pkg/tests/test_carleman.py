import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_slice
from fbcontrol.adjoint import AdjointField, solve_adjoint
from fbcontrol.carleman import (CarlemanWeightSet, Phi_weight, caccioppoli_log_ratio, caccioppoli_ratio,
                                carleman_ratio, carleman_terms, eta, eta_sup, guarded_exp, hardy_check,
                                observability_ratio, phi_weight, psi_weight, rho, theta, xi)
from fbcontrol.cli import random_hardy_profile
from fbcontrol.config import DegenerateRatioError, DomainError, ProblemConfig
from fbcontrol.transform import BoundaryTrajectory

ALPHAS = [0.0, 0.5, 1.0, 1.5]


def test_theta_midpoint_and_symmetry(rng):
    assert theta(0.5, 1.0) == 256.0
    t = rng.uniform(0.01, 0.99, 50)
    np.testing.assert_allclose(theta(t, 1.0), theta(1.0 - t, 1.0), rtol=1e-12)
    assert np.all(theta(t, 1.0) >= 256.0)


@pytest.mark.parametrize("t", [0.0, 1.0, -0.1])
def test_theta_endpoint_error(t):
    with pytest.raises(DomainError):
        theta(t, 1.0)


def test_rho_values():
    assert rho(0.0) == 0.0
    assert rho(1.0) == 1.0
    assert rho(0.5) == pytest.approx(0.3502604, abs=1e-7)


def test_rho_derivatives_at_endpoints():
    # rho^(k)(0) = 0 for k <= 3, while every derivative up to order 3 equals 1 at lam = 1
    for k in (1, 2, 3):
        assert rho(0.0, k) == 0.0
        assert rho(1.0, k) == pytest.approx(1.0, abs=1e-12)
    lam = np.linspace(0, 1, 7)
    eps = 1e-6
    np.testing.assert_allclose(rho(lam, 1), (rho(lam + eps) - rho(lam - eps)) / (2 * eps), atol=1e-6)


def test_xi_pieces():
    c, d = 0.25, 0.45
    assert xi(0.1, c, d) == 1.0 and xi(0.5, c, d) == 0.0
    assert xi(c, c, d) == 1.0 and xi(d, c, d) == 0.0
    assert xi(0.35, c, d) == pytest.approx(rho(0.5))
    with pytest.raises(ValueError):
        xi(0.3, d, c)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_Phi_positive_and_continuous(alpha):
    cfg = ProblemConfig(alpha=alpha)
    x = np.linspace(0.0, cfg.B, 10**4)
    assert Phi_weight(x, cfg).min() > 0.0
    assert abs(phi_weight(cfg.c, cfg) - Phi_weight(cfg.c, cfg)) <= 1e-12
    assert abs(Phi_weight(cfg.d, cfg) - psi_weight(cfg.d, cfg)) <= 1e-12


def test_psi_at_B_and_eta_norm():
    cfg = ProblemConfig()
    assert eta(cfg.B, cfg) == 1.0
    assert psi_weight(cfg.B, cfg) == pytest.approx(np.exp(2 * eta_sup(cfg)) - np.e)
    assert eta_sup(cfg) == pytest.approx(cfg.B / cfg.d + 1.0)
    with pytest.raises(DomainError):
        Phi_weight(cfg.B + 0.1, cfg)


def test_phi_weight_alpha_one_branch():
    cfg = ProblemConfig(alpha=1.0)
    assert phi_weight(0.1, cfg) == pytest.approx(np.exp(cfg.d) - np.exp(0.1))


def test_weight_set_invariants():
    cfg = ProblemConfig(Ns=32, Nt=64)
    ws = CarlemanWeightSet.build(50.0, BoundaryTrajectory.wobble(cfg), cfg)
    assert np.all(ws.theta_n >= theta(0.5 * cfg.T, cfg.T))
    w = ws.weight()
    assert np.all((w >= 0.0) & (w <= 1.0))
    assert not w.any()  # everything past the guard at s = 50, T = 1
    shifted = ws.weight(ws.exponent().min())
    assert shifted.max() == 1.0
    with pytest.raises(ValueError):
        CarlemanWeightSet.build(0.0, BoundaryTrajectory.wobble(cfg), cfg)


def test_guarded_exp_flushes():
    assert guarded_exp(701.0) == 0.0
    assert guarded_exp(700.0) == pytest.approx(np.exp(-700.0))
    assert guarded_exp(0.0) == 1.0


def test_hardy_analytic_cases():
    lhs, rhs = hardy_check(np.linspace(0.0, 1.0, 9), 0.0)
    assert (lhs, rhs) == (pytest.approx(1.0, abs=1e-12), pytest.approx(4.0, abs=1e-12))
    lhs, rhs = hardy_check(1.0 - np.linspace(0.0, 1.0, 9), 1.5)
    assert lhs == pytest.approx(16.0 / 15.0, abs=1e-12) and rhs == pytest.approx(6.4, abs=1e-12)
    assert hardy_check(np.zeros(9), 0.5) == (0.0, 0.0)


def test_hardy_domain_length_scaling():
    # z(x) = x on (0, 2), alpha* = 0: lhs = 2, rhs = 8
    lhs, rhs = hardy_check(np.linspace(0.0, 2.0, 5), 0.0, l_t=2.0)
    assert lhs == pytest.approx(2.0) and rhs == pytest.approx(8.0)


def test_hardy_regime_errors():
    with pytest.raises(ValueError):
        hardy_check(np.linspace(0, 1, 5), 1.0)
    with pytest.raises(ValueError):
        hardy_check(np.linspace(0, 1, 5), 2.0)
    with pytest.raises(DomainError, match="z\\(0\\)"):
        hardy_check(1.0 - np.linspace(0, 1, 5), 0.5)
    with pytest.raises(DomainError, match="z\\(l_t\\)"):
        hardy_check(np.linspace(0, 1, 5), 1.5)


@given(st.sampled_from([0.0, 0.3, 0.5, 0.9, 1.1, 1.5, 1.9]), st.integers(0, 2**32 - 1), st.integers(2, 80))
def test_hardy_inequality_property(alpha_star, seed, n):
    z = random_hardy_profile(np.random.default_rng(seed), alpha_star, n)
    lhs, rhs = hardy_check(z, alpha_star)
    assert lhs >= 0.0 and rhs >= 0.0
    assert lhs <= rhs * 1.05 + 1e-14


def test_hardy_near_extremal_profile():
    # x^((1 - a)/2) cut off linearly approaches the sharp constant from below
    a = 0.0
    x = np.linspace(0.0, 1.0, 4001)
    z = np.minimum(x ** 0.5 * np.minimum(1.0, 20 * x), 1.0) * (1.0 - x)
    lhs, rhs = hardy_check(z, a)
    assert 0.3 < lhs / rhs <= 1.0


@pytest.fixture(scope="module")
def ref():
    cfg = ProblemConfig(Ns=64, Nt=128)
    return cfg, BoundaryTrajectory.constant(cfg)


def test_degenerate_ratios_flagged(ref):
    cfg, l = ref
    zero = AdjointField(np.zeros((cfg.Nt + 1, cfg.Ns + 1)), False)
    with pytest.raises(DegenerateRatioError, match="vanishes on ω|vanishes on omega"):
        caccioppoli_ratio(zero, 50.0, l, cfg)
    with pytest.raises(DegenerateRatioError):
        carleman_ratio(zero, None, 50.0, l, cfg)
    with pytest.raises(DegenerateRatioError):
        observability_ratio(np.zeros(cfg.Ns + 1), l, cfg)


def test_ratios_on_random_adjoints(ref, rng):
    cfg, l = ref
    for _ in range(3):
        phi_T = random_slice(cfg, rng)
        phi = solve_adjoint(phi_T, None, l, cfg)
        logs = [caccioppoli_log_ratio(phi, s, l, cfg) for s in (50.0, 100.0, 200.0)]
        assert np.all(np.isfinite(logs)) and logs[0] > logs[1] > logs[2]
        plain = [caccioppoli_ratio(phi, s, l, cfg) for s in (50.0, 100.0, 200.0)]
        assert plain[0] >= plain[1] >= plain[2] >= 0.0
        terms = carleman_terms(phi, None, 50.0, l, cfg)
        assert terms.lhs >= terms.rhs > 0.0
        assert np.isfinite(terms.ratio)


def test_carleman_source_enters_rhs(ref, rng):
    cfg, l = ref
    phi = solve_adjoint(random_slice(cfg, rng), None, l, cfg)
    g = rng.standard_normal((cfg.Nt + 1, cfg.Ns + 1))
    assert carleman_terms(phi, g, 50.0, l, cfg).rhs > carleman_terms(phi, None, 50.0, l, cfg).rhs


def test_caccioppoli_finite_at_small_s(rng):
    # short horizon keeps exp(-2 s sigma) representable without shifting
    cfg = ProblemConfig(T=4.0, Ns=32, Nt=64)
    l = BoundaryTrajectory.constant(cfg)
    phi = solve_adjoint(random_slice(cfg, rng), None, l, cfg)
    vals = [caccioppoli_ratio(phi, s, l, cfg) for s in (0.5, 1.0, 2.0)]
    assert vals[0] > vals[1] > vals[2] > 0.0
    np.testing.assert_allclose(np.log(vals), [caccioppoli_log_ratio(phi, s, l, cfg) for s in (0.5, 1.0, 2.0)],
                               rtol=1e-10)


def test_observability_scale_invariant(ref, rng):
    cfg, l = ref
    phi_T = random_slice(cfg, rng)
    r = observability_ratio(phi_T, l, cfg)
    assert np.isfinite(r) and r > 0
    assert observability_ratio(7.5 * phi_T, l, cfg) == pytest.approx(r, rel=1e-12)
    assert np.isfinite(observability_ratio(phi_T, BoundaryTrajectory.wobble(cfg), cfg))
