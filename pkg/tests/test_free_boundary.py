from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

import fbcontrol.free_boundary as fb
from fbcontrol.config import ConvergenceError, MembershipError, ProblemConfig, control_reference_config
from fbcontrol.forward import TransformedField
from fbcontrol.free_boundary import (beta_continuation, boundary_gradient, fixed_point_solve, holder_norm,
                                     lambda_from_gradient, lambda_map, membership_check)
from fbcontrol.transform import BoundaryTrajectory, space_nodes, time_nodes


def _field(cfg, fn):
    z = space_nodes(cfg)
    return TransformedField(np.tile(fn(z), (cfg.Nt + 1, 1)), cfg.neumann_left)


def _y0(cfg, eps=None):
    eps = cfg.eps if eps is None else eps
    y0 = eps * np.sin(np.pi * space_nodes(cfg) / cfg.L0)
    y0[-1] = 0.0
    return y0


def test_boundary_gradient_zero(small_cfg):
    V = boundary_gradient(_field(small_cfg, lambda z: 0 * z), BoundaryTrajectory.constant(small_cfg), small_cfg)
    assert not V.any()


def test_boundary_gradient_exact_on_affine(small_cfg):
    V = boundary_gradient(_field(small_cfg, lambda z: small_cfg.L0 - z), BoundaryTrajectory.constant(small_cfg),
                          small_cfg)
    np.testing.assert_allclose(V, -1.0, rtol=1e-12)


def test_boundary_gradient_quadratic_on_doubled_domain():
    cfg = ProblemConfig(Ns=64, Nt=8, B=2.5)
    l = BoundaryTrajectory.constant(cfg, 2.0 * cfg.L0)
    V = boundary_gradient(_field(cfg, lambda z: (cfg.L0 - z) ** 2), l, cfg)
    assert np.abs(V).max() <= 2.0 * cfg.dz**2 * 10


def test_lambda_constant_gradient():
    cfg = ProblemConfig(alpha=0.0, Ns=16, Nt=32)
    l = BoundaryTrajectory.constant(cfg)
    out = lambda_from_gradient(l, np.full(cfg.Nt + 1, 0.3), cfg)
    t = time_nodes(cfg)
    np.testing.assert_allclose(out.values, cfg.L0 - 0.3 * t, atol=1e-15)
    np.testing.assert_allclose(out.derivs, -0.3)


def test_lambda_linear_gradient():
    cfg = ProblemConfig(alpha=0.0, Ns=16, Nt=32)
    t = time_nodes(cfg)
    out = lambda_from_gradient(BoundaryTrajectory.constant(cfg), t, cfg)
    np.testing.assert_allclose(out.values, cfg.L0 - t**2 / 2, atol=1e-15)


def test_lambda_starts_at_L0_and_stores_ode(rng):
    cfg = ProblemConfig(Ns=16, Nt=32)
    l = BoundaryTrajectory.wobble(cfg)
    V = rng.standard_normal(cfg.Nt + 1)
    out = lambda_from_gradient(l, V, cfg)
    assert out.values[0] == cfg.L0
    np.testing.assert_array_equal(out.derivs, -(l.values**cfg.alpha) * V)


def test_lambda_map_zero_data(small_cfg):
    out = lambda_map(BoundaryTrajectory.wobble(small_cfg), np.zeros(small_cfg.Ns + 1), small_cfg)
    assert np.all(out.values == small_cfg.L0) and not out.derivs.any()


def test_membership_examples(small_cfg):
    cfg = small_cfg
    assert membership_check(BoundaryTrajectory.constant(cfg), cfg)
    vals = np.full(cfg.Nt + 1, cfg.L0)
    vals[7] = cfg.B + 0.01
    v = membership_check(BoundaryTrajectory(vals, np.zeros_like(vals)), cfg)
    assert not v and v.index == 7 and v.constraint == "upper bound"
    t = time_nodes(cfg)
    r = 1.01 * cfg.R
    v = membership_check(BoundaryTrajectory(cfg.L0 + r * t, np.full_like(t, r)), cfg)
    assert not v and v.constraint == "derivative bound" and v.index == 0
    v = membership_check(BoundaryTrajectory.constant(cfg, 0.9), cfg)
    assert v.constraint == "initial value"
    vals = np.full(cfg.Nt + 1, cfg.L0)
    vals[3:] = cfg.Lstar - 0.01
    v = membership_check(BoundaryTrajectory(vals, np.zeros_like(vals)), cfg)
    assert v.constraint == "lower bound" and v.index == 3


def test_holder_examples():
    t = np.linspace(0.0, 1.0, 101)
    assert holder_norm(np.full(101, -2.5), t) == 2.5
    assert holder_norm(t, t, 0.5) == pytest.approx(2.0, abs=1e-12)
    assert holder_norm(np.sqrt(t), t, 0.5) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ValueError):
        holder_norm(np.ones(1), np.zeros(1))
    with pytest.raises(ValueError):
        holder_norm(t, t, 0.0)


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_holder_norm_monotone_in_kappa(seed, k1, k2):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0.0, 1.0, 20))
    f = rng.standard_normal(20)
    lo, hi = min(k1, k2), max(k1, k2)
    assert holder_norm(f, t, hi) >= holder_norm(f, t, lo) - 1e-12


def test_zero_data_fixed_point_in_one_iteration(small_cfg):
    rep = fixed_point_solve(np.zeros(small_cfg.Ns + 1), small_cfg)
    assert rep.outer_iterations == 1
    assert rep.ode_residual == 0.0 and rep.terminal_norm == 0.0
    assert np.all(rep.trajectory.values == small_cfg.L0)


def test_small_data_fixed_point_coarse():
    cfg = ProblemConfig(Ns=32, Nt=64)
    rep = fixed_point_solve(_y0(cfg), cfg)
    assert rep.c1_distance_history[-1] <= cfg.tol_fp
    assert membership_check(rep.trajectory, cfg)
    assert rep.ode_residual <= 10 * (cfg.dt + cfg.dz)
    assert rep.terminal_norm <= cfg.beta
    assert set(rep.to_json_dict()) == {"outer_iterations", "ode_residual", "terminal_norm", "holder_norm",
                                       "c1_distance_history"}


def test_large_data_violates_membership():
    cfg = ProblemConfig(Ns=32, Nt=64)
    with pytest.raises(MembershipError, match="reduce ‖y0‖") as err:
        fixed_point_solve(_y0(cfg, 10.0), cfg)
    assert err.value.constraint == "derivative bound"
    assert err.value.iterate == 1


def test_damping_falls_back_after_two_rises(monkeypatch):
    cfg = ProblemConfig(Ns=16, Nt=32)
    t = time_nodes(cfg)
    bump = 1e-3 * np.sin(np.pi * t / cfg.T)
    dbump = 1e-3 * np.pi / cfg.T * np.cos(np.pi * t / cfg.T)

    def fake_step(l, y0, cfg_, beta=None):
        # Lambda(l) = L0 - 1.5 (l - L0) + bump: plain Picard diverges, gamma = 1/2 contracts
        traj = BoundaryTrajectory(cfg.L0 - 1.5 * (l.values - cfg.L0) + bump, -1.5 * l.derivs + dbump)
        V = -traj.derivs / l.values**cfg.alpha
        hum = SimpleNamespace(final_terminal_norm=0.0, control_norm=0.0)
        return SimpleNamespace(trajectory=traj, V=V, hum=hum, control=None)

    monkeypatch.setattr(fb, "lambda_step", fake_step)
    rep = fixed_point_solve(np.zeros(cfg.Ns + 1), cfg, max_outer=60)
    assert rep.damping_used == 0.5
    h = rep.c1_distance_history
    assert h[1] > h[0] and h[2] > h[1]
    assert h[-1] <= cfg.tol_fp
    np.testing.assert_allclose(rep.trajectory.values, cfg.L0 + bump / 2.5, atol=1e-6)
    with pytest.raises(ConvergenceError):
        fixed_point_solve(np.zeros(cfg.Ns + 1), cfg, max_outer=3)


def test_damping_argument_validated(small_cfg):
    with pytest.raises(ValueError):
        fixed_point_solve(np.zeros(small_cfg.Ns + 1), small_cfg, damping=1.5)


def test_continuation_contracts():
    cfg = control_reference_config(Ns=64, Nt=64)
    res = beta_continuation(_y0(cfg), cfg, [1e-2, 1e-3, 1e-4])
    assert len(res.reports) == 3 and len(res.distances) == 2
    for b, rep in zip(res.betas, res.reports):
        assert rep.terminal_norm <= b
    assert set(res.to_json_dict()) >= {"betas", "c1_distances", "control_norms"}


def test_continuation_single_beta_matches_fixed_point():
    cfg = ProblemConfig(Ns=32, Nt=64)
    res = beta_continuation(_y0(cfg), cfg, [1e-3])
    rep = fixed_point_solve(_y0(cfg), cfg, beta=1e-3)
    assert res.distances == []
    assert res.reports[0].trajectory.c1_distance(rep.trajectory) == 0.0


def test_continuation_zero_data():
    cfg = ProblemConfig(Ns=16, Nt=32)
    res = beta_continuation(np.zeros(cfg.Ns + 1), cfg, [1e-2, 1e-3, 1e-4])
    assert res.distances == [0.0, 0.0]


def test_continuation_validates_betas(small_cfg):
    for bad in ([], [1e-3, 1e-2], [1e-3, 1e-3], [1e-3, -1.0]):
        with pytest.raises(ValueError):
            beta_continuation(np.zeros(small_cfg.Ns + 1), small_cfg, bad)


def test_continuation_failure_attaches_partial():
    ctl = control_reference_config(Ns=32, Nt=64, cg_maxiter=2)
    with pytest.raises(ConvergenceError) as err:
        beta_continuation(_y0(ctl), ctl, [1e-1, 1e-6])
    assert len(err.value.partial.reports) == 1
