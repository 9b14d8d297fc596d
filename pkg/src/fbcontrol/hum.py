"""Approximate null controls from the control Gramian.

The Gramian maps terminal adjoint data to the terminal state driven by the
adjoint's restriction to the control window:

    G phi_T = y^v(T),   v = phi|_omega,   y^v solves the forward problem from 0.

It is self-adjoint and positive semi-definite in the physical L^2(0, l(T))
inner product, and ``<G u, u> = ||v||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .adjoint import ControlField, restrict_to_window, slice_inner, solve_adjoint
from .config import ConvergenceError, ProblemConfig
from .forward import StepSystem, TransformedField, project_slice, slice_weights, solve_forward, step_system
from .transform import BoundaryTrajectory


@dataclass
class HUMReport:
    iterations: int
    residual_history: list
    final_terminal_norm: float
    control_norm: float
    phi_T: np.ndarray = field(repr=False)
    state: TransformedField = field(repr=False)

    def to_json_dict(self) -> dict:
        return {
            "iterations": int(self.iterations),
            "final_terminal_norm": float(self.final_terminal_norm),
            "control_norm": float(self.control_norm),
            "residual_history": [float(r) for r in self.residual_history],
        }


class Gramian:
    """Matrix-free Gramian on a fixed trajectory (step matrices assembled once)."""

    def __init__(self, l: BoundaryTrajectory, cfg: ProblemConfig, system: StepSystem | None = None):
        self.l = l
        self.cfg = cfg
        self.system = step_system(l, cfg) if system is None else system
        self.zero = np.zeros(cfg.Ns + 1)

    def adjoint(self, phi_T):
        return solve_adjoint(phi_T, None, self.l, self.cfg, system=self.system)

    def control(self, phi_T) -> ControlField:
        return restrict_to_window(self.adjoint(phi_T), self.l, self.cfg)

    def forward(self, y0, v: ControlField | None) -> TransformedField:
        return solve_forward(y0, None if v is None else v.data, self.l, self.cfg, system=self.system)

    def apply(self, phi_T) -> np.ndarray:
        return self.forward(self.zero, self.control(phi_T)).final

    def inner(self, u, v) -> float:
        return slice_inner(u, v, self.cfg.Nt, self.l, self.cfg)

    def norm(self, u) -> float:
        return float(np.sqrt(max(self.inner(u, u), 0.0)))


def gramian_apply(phi_T, l: BoundaryTrajectory, cfg: ProblemConfig) -> np.ndarray:
    return Gramian(l, cfg).apply(phi_T)


def functional_J(phi_T, y0, l: BoundaryTrajectory, cfg: ProblemConfig, beta: float | None = None) -> float:
    """``1/2 ||phi|_omega||^2 + beta ||phi_T|| + (phi(0), y0)``."""
    beta = cfg.beta if beta is None else beta
    G = Gramian(l, cfg)
    phi = G.adjoint(phi_T)
    v = restrict_to_window(phi, l, cfg)
    y0 = project_slice(y0, cfg, "initial slice")
    return 0.5 * v.norm() ** 2 + beta * G.norm(phi.terminal) + slice_inner(phi.initial, y0, 0, l, cfg)


def _finish(G: Gramian, y0, phi_T, iterations, history):
    v = G.control(phi_T)
    y = G.forward(y0, v)
    report = HUMReport(
        iterations=iterations,
        residual_history=history,
        final_terminal_norm=G.norm(y.final),
        control_norm=v.norm(),
        phi_T=phi_T,
        state=y,
    )
    return v, report


def hum_solve(y0, l: BoundaryTrajectory, cfg: ProblemConfig, beta: float | None = None,
              maxiter: int | None = None, system: StepSystem | None = None):
    """Control with ``||y(T)||_{L^2(0, l(T))} <= beta`` from ``G phi_T = -y_free(T)``.

    Conjugate-residual iteration from ``phi_T = 0``. Each new search direction
    is orthogonalized (two Gram-Schmidt passes) against all previous images
    ``G p_i``, and the step minimizes ``||G phi_T + y_free(T)||`` along it.
    That residual equals ``||y(T)||`` of the controlled state, so the history
    is non-increasing. Stops at the first iterate with residual <= beta.

    Full orthogonalization keeps the iterate a well-conditioned function of the
    data; the three-term recurrence loses conjugacy on this Gramian and then
    amplifies rounding in ``y0`` by many orders of magnitude.
    """
    beta = cfg.beta if beta is None else beta
    maxiter = cfg.cg_maxiter if maxiter is None else maxiter
    G = Gramian(l, cfg, system)
    y0 = project_slice(y0, cfg, "initial slice")
    b = -G.forward(y0, None).final

    x = np.zeros_like(b)
    r = b.copy()
    history = [G.norm(r)]
    if history[0] <= beta:
        return _finish(G, y0, x, 0, history)

    dirs, images = [], []
    for it in range(1, maxiter + 1):
        p = r.copy()
        Ap = G.apply(p)
        for _ in range(2):
            for q, Aq in zip(dirs, images):
                c = G.inner(Ap, Aq)
                p -= c * q
                Ap -= c * Aq
        nrm = G.norm(Ap)
        if nrm == 0.0:
            break
        p /= nrm
        Ap /= nrm
        dirs.append(p)
        images.append(Ap)
        step = G.inner(r, Ap)
        x += step * p
        r -= step * Ap
        history.append(G.norm(r))
        if history[-1] <= beta:
            v, report = _finish(G, y0, x, it, history)
            if report.final_terminal_norm <= beta:
                return v, report
            # recursive residual drifted from the true one
            r = b - G.apply(x)
    raise ConvergenceError(
        f"Gramian iteration did not reach ||y(T)|| <= {beta:g} within {maxiter} iterations "
        f"(last residual {history[-1]:.3e})",
        history,
    )


def gramian_matrix(l: BoundaryTrajectory, cfg: ProblemConfig) -> tuple[np.ndarray, np.ndarray, slice]:
    """Dense Gramian on the free nodes, symmetrized by the terminal weights.

    Returns ``(S, d, free)`` with ``S = D^{1/2} G D^{-1/2}`` symmetric and
    ``d`` the diagonal of ``D`` on the free nodes.
    """
    G = Gramian(l, cfg)
    fr = G.system.free
    d = (l.values[-1] / cfg.L0) * slice_weights(cfg)[fr]
    m = d.size
    cols = np.empty((m, m))
    e = np.zeros(cfg.Ns + 1)
    idx = np.arange(cfg.Ns + 1)[fr]
    for k in range(m):
        e[:] = 0.0
        e[idx[k]] = 1.0
        cols[:, k] = G.apply(e)[fr]
    sq = np.sqrt(d)
    S = sq[:, None] * cols / sq[None, :]
    return 0.5 * (S + S.T), d, fr


def minimize_functional(y0, l: BoundaryTrajectory, cfg: ProblemConfig, beta: float | None = None):
    """Exact minimizer of the penalized functional over terminal data.

    Stationarity gives ``(G + mu) phi_T = -y_free(T)`` with ``mu ||phi_T|| = beta``,
    i.e. the regularized solution whose residual norm equals beta. Solved with
    the eigendecomposition of the dense Gramian and a scalar root find in mu.
    Returns ``(phi_T, ControlField, HUMReport)``.
    """
    beta = cfg.beta if beta is None else beta
    G = Gramian(l, cfg)
    y0 = project_slice(y0, cfg, "initial slice")
    b_full = -G.forward(y0, None).final
    S, d, fr = gramian_matrix(l, cfg)
    bt = np.sqrt(d) * b_full[fr]
    bnorm = float(np.linalg.norm(bt))
    phi = np.zeros(cfg.Ns + 1)
    if bnorm <= beta:
        v, rep = _finish(G, y0, phi, 0, [bnorm])
        return phi, v, rep
    lam, U = np.linalg.eigh(S)
    lam = np.clip(lam, 0.0, None)
    c = U.T @ bt

    def resid(log_mu):
        mu = np.exp(log_mu)
        return np.log(np.linalg.norm(mu * c / (lam + mu))) - np.log(beta)

    lo, hi = np.log(1e-30), np.log(max(1e3 * lam.max(), 1.0) * bnorm / beta)
    log_mu = brentq(resid, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    mu = np.exp(log_mu)
    xt = U @ (c / (lam + mu))
    phi[fr] = xt / np.sqrt(d)
    v, rep = _finish(G, y0, phi, 0, [bnorm, float(np.linalg.norm(mu * c / (lam + mu)))])
    return phi, v, rep


def cost_check(report: HUMReport, y0, cfg: ProblemConfig) -> float:
    """``||v|| / ||y0||_{L^2(0, L0)}``; zero initial data gives 0."""
    y0 = np.asarray(y0, dtype=float)
    norm0 = float(np.sqrt(np.sum(slice_weights(cfg) * y0**2)))
    if norm0 == 0.0:
        return 0.0
    return report.control_norm / norm0
