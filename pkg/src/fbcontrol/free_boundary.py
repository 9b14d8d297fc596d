"""Fixed-point iteration for the free boundary.

Given a candidate trajectory ``l``, the controlled state on ``0 < x < l(t)``
yields the boundary gradient ``V(t) = y_x(l(t), t)`` and the update

    Lambda(l)(t) = L0 - int_0^t l(s)^alpha V(s) ds,   Lambda(l)' = -l^alpha V.

Admissible trajectories form the set
``M = {L* <= l <= B, l(0) = L0, |l'| <= R}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import kernels
from .adjoint import ControlField
from .config import ConvergenceError, FBControlError, MembershipError, ProblemConfig
from .forward import TransformedField
from .hum import HUMReport, hum_solve
from .transform import BoundaryTrajectory, time_nodes


def boundary_gradient(y: TransformedField, l: BoundaryTrajectory, cfg: ProblemConfig) -> np.ndarray:
    """``V_n = (L0 / l_n) w_zeta(L0, t_n)`` by the one-sided second-order rule
    (the Dirichlet node ``w_Ns = 0`` drops out)."""
    w = y.data
    wz = (-4.0 * w[:, -2] + w[:, -3]) / (2.0 * cfg.dz)
    return (cfg.L0 / l.values) * wz


def lambda_from_gradient(l: BoundaryTrajectory, V, cfg: ProblemConfig) -> BoundaryTrajectory:
    """The update map for prescribed boundary-gradient samples ``V``."""
    V = np.asarray(V, dtype=float)
    if V.shape != l.values.shape:
        raise ValueError(f"V must have {l.values.size} samples, got shape {V.shape}")
    rate = l.values**cfg.alpha * V
    values = cfg.L0 - cumulative_trapezoid(rate, dx=cfg.dt, initial=0.0)
    return BoundaryTrajectory(values, -rate)


@dataclass
class LambdaResult:
    trajectory: BoundaryTrajectory
    V: np.ndarray
    control: ControlField
    hum: HUMReport


def lambda_step(l: BoundaryTrajectory, y0, cfg: ProblemConfig, beta: float | None = None) -> LambdaResult:
    v, rep = hum_solve(y0, l, cfg, beta=beta)
    V = boundary_gradient(rep.state, l, cfg)
    return LambdaResult(lambda_from_gradient(l, V, cfg), V, v, rep)


def lambda_map(l: BoundaryTrajectory, y0, cfg: ProblemConfig, beta: float | None = None) -> BoundaryTrajectory:
    return lambda_step(l, y0, cfg, beta).trajectory


@dataclass(frozen=True)
class MembershipVerdict:
    member: bool
    index: int | None = None
    constraint: str | None = None
    value: float | None = None

    def __bool__(self):
        return self.member


def membership_check(l: BoundaryTrajectory, cfg: ProblemConfig, rtol: float = 1e-12) -> MembershipVerdict:
    """First violated constraint of ``M`` in time order (``None`` fields when a member)."""
    vals, ders = l.values, l.derivs
    slack = rtol * max(cfg.B, 1.0)
    if abs(vals[0] - cfg.L0) > slack:
        return MembershipVerdict(False, 0, "initial value", float(vals[0]))
    checks = (
        ("lower bound", vals < cfg.Lstar - slack, vals),
        ("upper bound", vals > cfg.B + slack, vals),
        ("derivative bound", np.abs(ders) > cfg.R * (1.0 + rtol), ders),
    )
    first = None
    for name, bad, src in checks:
        if np.any(bad):
            n = int(np.argmax(bad))
            if first is None or n < first[0]:
                first = (n, name, float(src[n]))
    if first is None:
        return MembershipVerdict(True)
    return MembershipVerdict(False, *first)


def holder_norm(f, t, kappa: float = 0.5) -> float:
    """``||f||_inf + sup_{i != j} |f_i - f_j| / |t_i - t_j|^kappa``."""
    f = np.ascontiguousarray(f, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    if f.ndim != 1 or f.shape != t.shape:
        raise ValueError("f and t must be 1-D arrays of equal length")
    if f.size < 2:
        raise ValueError("holder_norm needs at least 2 samples")
    if not (0.0 < kappa <= 1.0):
        raise ValueError(f"kappa must lie in (0, 1]; got {kappa}")
    return float(np.max(np.abs(f)) + kernels.holder_seminorm(f, t, kappa))


@dataclass
class FixedPointReport:
    outer_iterations: int
    c1_distance_history: list
    ode_residual: float
    terminal_norm: float
    trajectory: BoundaryTrajectory
    holder_norm: float
    control_norm: float = 0.0
    damping_used: float = 1.0
    control: ControlField | None = field(default=None, repr=False)
    hum: HUMReport | None = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "outer_iterations": int(self.outer_iterations),
            "ode_residual": float(self.ode_residual),
            "terminal_norm": float(self.terminal_norm),
            "holder_norm": float(self.holder_norm),
            "c1_distance_history": [float(d) for d in self.c1_distance_history],
        }


def _raise_membership(verdict: MembershipVerdict, k: int):
    raise MembershipError(
        f"iterate {k} leaves the admissible set: {verdict.constraint} violated at time node "
        f"{verdict.index} (value {verdict.value:.6g}); reduce ‖y0‖",
        iterate=k, constraint=verdict.constraint, index=verdict.index,
    )


def fixed_point_solve(y0, cfg: ProblemConfig, damping: float | None = None, tol_fp: float | None = None,
                      max_outer: int | None = None, l_init: BoundaryTrajectory | None = None,
                      beta: float | None = None) -> FixedPointReport:
    """Damped Picard iteration ``l <- (1 - gamma) l + gamma Lambda(l)`` from ``l = L0``.

    ``gamma`` drops to 0.5 after two consecutive increases of the C^1 step.
    """
    gamma = cfg.gamma if damping is None else float(damping)
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"damping must lie in (0, 1]; got {gamma}")
    tol_fp = cfg.tol_fp if tol_fp is None else tol_fp
    max_outer = cfg.max_outer if max_outer is None else max_outer
    l = BoundaryTrajectory.constant(cfg) if l_init is None else l_init
    verdict = membership_check(l, cfg)
    if not verdict:
        _raise_membership(verdict, 0)

    history = []
    rises = 0
    for k in range(1, max_outer + 1):
        step = lambda_step(l, y0, cfg, beta)
        verdict = membership_check(step.trajectory, cfg)
        if not verdict:
            _raise_membership(verdict, k)
        l_new = l.blend(step.trajectory, gamma)
        dist = l_new.c1_distance(l)
        if not np.isfinite(dist):
            raise ConvergenceError(f"non-finite C1 distance at outer iteration {k}", history)
        rises = rises + 1 if history and dist > history[-1] else 0
        history.append(dist)
        l = l_new
        if dist <= tol_fp:
            break
        if rises >= 2 and gamma > 0.5:
            gamma = 0.5
            rises = 0
    else:
        raise ConvergenceError(
            f"boundary iteration did not reach C1 distance <= {tol_fp:g} in {max_outer} outer iterations",
            history,
        )

    final = lambda_step(l, y0, cfg, beta)
    rate = l.values**cfg.alpha * final.V
    t = time_nodes(cfg)
    return FixedPointReport(
        outer_iterations=k,
        c1_distance_history=history,
        ode_residual=float(np.max(np.abs(l.derivs + rate))),
        terminal_norm=final.hum.final_terminal_norm,
        trajectory=l,
        holder_norm=holder_norm(final.trajectory.derivs, t, cfg.kappa),
        control_norm=final.hum.control_norm,
        damping_used=gamma,
        control=final.control,
        hum=final.hum,
    )


@dataclass
class ContinuationResult:
    betas: list
    reports: list = field(default_factory=list)
    distances: list = field(default_factory=list)

    @property
    def control_norms(self) -> list:
        return [r.control_norm for r in self.reports]

    def to_json_dict(self) -> dict:
        return {
            "betas": [float(b) for b in self.betas[: len(self.reports)]],
            "c1_distances": [float(d) for d in self.distances],
            "control_norms": [float(c) for c in self.control_norms],
            "reports": [r.to_json_dict() for r in self.reports],
        }


def beta_continuation(y0, cfg: ProblemConfig, betas, **kwargs) -> ContinuationResult:
    """Fixed points for decreasing targets, each warm-started from the previous one.

    A failing target re-raises its error with the completed part attached as
    ``err.partial``.
    """
    betas = [float(b) for b in betas]
    if not betas or any(b <= 0 for b in betas) or any(b1 >= b0 for b0, b1 in zip(betas, betas[1:])):
        raise ValueError(f"betas must be positive and strictly decreasing; got {betas}")
    result = ContinuationResult(betas)
    l = kwargs.pop("l_init", None)
    for b in betas:
        try:
            rep = fixed_point_solve(y0, cfg, l_init=l, beta=b, **kwargs)
        except FBControlError as err:
            err.partial = result
            raise
        if result.reports:
            result.distances.append(rep.trajectory.c1_distance(result.reports[-1].trajectory))
        result.reports.append(rep)
        l = rep.trajectory
    return result
