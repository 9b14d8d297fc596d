"""Carleman weight system and measured-ratio diagnostics for the adjoint problem.

Weights: ``sigma(x, t) = theta(t) Phi(x)`` with ``theta = (t (T - t))^-4`` and
``Phi`` a smooth blend (through the cutoff ``xi``) of a degenerate-side weight
on ``x < c`` and an exponential weight on ``x > d``.

At realistic ``s`` the factor ``exp(-2 s sigma)`` underflows everywhere, so the
ratio diagnostics evaluate ``exp(-(2 s sigma - m))`` with ``m`` the smallest
exponent on the quadrature set. Both sides of each inequality carry the same
factor ``exp(-m)``, which cancels in the ratio.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointField, restrict_to_window, solve_adjoint
from .config import DegenerateRatioError, DomainError, ProblemConfig
from .forward import slice_weights
from .free_boundary import boundary_gradient
from .transform import BoundaryTrajectory, clipped_window_weights, physical_nodes, pushforward_gradient, time_nodes

EXP_GUARD = 700.0

# 6 rho(lam) = 134 lam^4 - 309 lam^5 + 252 lam^6 - 71 lam^7; integer coefficients
# keep rho(1) = 1 exact in floating point
_RHO6 = np.polynomial.Polynomial([0.0, 0.0, 0.0, 0.0, 134.0, -309.0, 252.0, -71.0])


def theta(t, T: float):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or np.any(t >= T):
        raise DomainError(f"theta is singular at the endpoints; need 0 < t < T = {T}")
    out = (t * (T - t)) ** -4.0
    return float(out) if out.ndim == 0 else out


def rho(lam, k: int = 0):
    """``rho`` or its ``k``-th derivative, Horner form."""
    lam = np.asarray(lam, dtype=float)
    poly = _RHO6.deriv(k) if k else _RHO6
    acc = np.zeros_like(lam)
    for a in poly.coef[::-1]:
        acc = acc * lam + a
    acc = acc / 6.0
    return float(acc) if acc.ndim == 0 else acc


def xi(x, c: float, d: float):
    if not c < d:
        raise ValueError(f"cutoff needs c < d; got c={c}, d={d}")
    x = np.asarray(x, dtype=float)
    lam = np.clip((d - x) / (d - c), 0.0, 1.0)
    out = np.where(x < c, 1.0, np.where(x > d, 0.0, rho(lam)))
    return float(out) if out.ndim == 0 else out


def eta(x, cfg: ProblemConfig):
    return -(np.asarray(x, dtype=float) - cfg.B) / cfg.d + 1.0


def eta_sup(cfg: ProblemConfig) -> float:
    """``||eta||_C0([0, B])``; eta is affine so the max sits at an endpoint."""
    return float(max(abs(eta(0.0, cfg)), abs(eta(cfg.B, cfg))))


def phi_weight(x, cfg: ProblemConfig):
    x = np.asarray(x, dtype=float)
    if cfg.alpha == 1.0:
        return np.exp(cfg.d) - np.exp(x)
    k = 2.0 - cfg.alpha
    return (cfg.d**k - x**k) / k**2


def psi_weight(x, cfg: ProblemConfig):
    return np.exp(2.0 * eta_sup(cfg)) - np.exp(eta(x, cfg))


def Phi_weight(x, cfg: ProblemConfig):
    """``Phi = xi phi + (1 - xi) psi`` on ``[0, B]``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > cfg.B):
        raise DomainError(f"Phi is defined on [0, B] = [0, {cfg.B}]")
    w = xi(x, cfg.c, cfg.d)
    out = w * phi_weight(x, cfg) + (1.0 - w) * psi_weight(x, cfg)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CarlemanWeightSet:
    """Weights on the interior time nodes ``1..Nt-1`` and the mapped space nodes."""

    s: float
    theta_n: np.ndarray
    Phi_j: np.ndarray
    exp_guard: float = EXP_GUARD

    @classmethod
    def build(cls, s: float, l: BoundaryTrajectory, cfg: ProblemConfig) -> "CarlemanWeightSet":
        if s <= 0:
            raise ValueError(f"s must be positive; got {s}")
        th = theta(time_nodes(cfg)[1:-1], cfg.T)
        return cls(float(s), th, Phi_weight(physical_nodes(l, cfg)[1:-1], cfg))

    def sigma(self) -> np.ndarray:
        return self.theta_n[:, None] * self.Phi_j

    def exponent(self) -> np.ndarray:
        return 2.0 * self.s * self.sigma()

    def weight(self, shift: float = 0.0) -> np.ndarray:
        """Guarded ``exp(-(2 s sigma - shift))``: exactly 0 past the guard."""
        return guarded_exp(self.exponent() - shift, self.exp_guard)


def guarded_exp(e, guard: float = EXP_GUARD):
    e = np.asarray(e, dtype=float)
    return np.where(e > guard, 0.0, np.exp(-np.minimum(e, guard)))


# --- Hardy-type inequality ---------------------------------------------------

def _power_integral(x0, x1, k: float):
    """Integral of ``x^k`` over ``[x0, x1]`` (``x0 = 0`` allowed when ``k > -1``)."""
    if k == -1.0:
        return np.log(x1 / x0)
    return (x1 ** (k + 1.0) - x0 ** (k + 1.0)) / (k + 1.0)


def hardy_constant(alpha_star: float) -> float:
    return 4.0 / (alpha_star - 1.0) ** 2


def hardy_check(z, alpha_star: float, l_t: float = 1.0) -> tuple[float, float]:
    """``(lhs, rhs) = (int x^(a-2) z^2, 4/(a-1)^2 int x^a z_x^2)`` over ``(0, l_t)``.

    ``z`` holds nodal values of a piecewise-linear function on a uniform grid;
    both integrals are evaluated exactly cell by cell.
    """
    a = float(alpha_star)
    if a == 1.0:
        raise ValueError("the Hardy-type inequality is excluded at alpha* = 1")
    if not (0.0 <= a < 2.0):
        raise ValueError(f"alpha* must lie in [0, 1) or (1, 2); got {a}")
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("z needs at least two nodal values")
    tol = 1e-12 * max(1.0, float(np.max(np.abs(z))))
    if a < 1.0 and abs(z[0]) > tol:
        raise DomainError(f"alpha* = {a} < 1 requires z(0) = 0; got z(0) = {z[0]:.3e}")
    if a > 1.0 and abs(z[-1]) > tol:
        raise DomainError(f"alpha* = {a} > 1 requires z(l_t) = 0; got z(l_t) = {z[-1]:.3e}")
    if a < 1.0:
        z = z.copy()
        z[0] = 0.0

    x = np.linspace(0.0, l_t, z.size)
    x0, x1 = x[:-1], x[1:]
    slope = np.diff(z) / np.diff(x)
    icpt = z[:-1] - slope * x0  # z = icpt + slope * x on each cell

    k = a - 2.0
    lhs = 0.0
    # first cell from the origin: drop the (zero) intercept terms when a < 1
    if a < 1.0:
        lhs += slope[0] ** 2 * _power_integral(0.0, x1[0], a)
    else:
        lhs += (icpt[0] ** 2 * _power_integral(0.0, x1[0], k)
                + 2.0 * icpt[0] * slope[0] * _power_integral(0.0, x1[0], k + 1.0)
                + slope[0] ** 2 * _power_integral(0.0, x1[0], a))
    lhs += float(np.sum(icpt[1:] ** 2 * _power_integral(x0[1:], x1[1:], k)
                        + 2.0 * icpt[1:] * slope[1:] * _power_integral(x0[1:], x1[1:], k + 1.0)
                        + slope[1:] ** 2 * _power_integral(x0[1:], x1[1:], a)))
    rhs = hardy_constant(a) * float(np.sum(slope**2 * _power_integral(x0, x1, a)))
    return float(lhs), rhs


# --- measured ratios ---------------------------------------------------------

def _interior_fields(phi: AdjointField, l: BoundaryTrajectory, cfg: ProblemConfig):
    """Values, physical gradients, positions and quadrature weights on interior times."""
    n_int = range(1, cfg.Nt)
    vals = phi.data[1:-1]
    grads = np.array([pushforward_gradient(phi.data[n], n, l, cfg) for n in n_int])
    x = physical_nodes(l, cfg)[1:-1]
    full = cfg.dt * (l.values[1:-1, None] / cfg.L0) * slice_weights(cfg)[None, :]
    return vals, grads, x, full


def _window(x, lo, hi, dt):
    return dt * np.array([clipped_window_weights(row, lo, hi) for row in x])


def _logsumexp(logs, weights):
    """``log sum(weights * exp(logs))`` over entries with positive weight."""
    live = weights > 0.0
    if not np.any(live):
        return -np.inf
    lw = logs[live] + np.log(weights[live])
    m = np.max(lw)
    if not np.isfinite(m):
        return m
    return float(m + np.log(np.sum(np.exp(lw - m))))


def _weighted_caccioppoli(phi, s, l, cfg):
    _, grads, x, _ = _interior_fields(phi, l, cfg)
    ws = CarlemanWeightSet.build(s, l, cfg)
    w0 = _window(x, cfg.c, cfg.d, cfg.dt)
    rhs = restrict_to_window(phi, l, cfg).norm() ** 2
    return ws, grads, w0, rhs


def caccioppoli_ratio(phi: AdjointField, s: float, l: BoundaryTrajectory, cfg: ProblemConfig) -> float:
    """``int int_omega0 exp(-2 s sigma) phi_x^2 / int int_omega phi^2``, unshifted weight.

    The guard flushes the weight to 0 once ``2 s sigma > 700``.
    """
    ws, grads, w0, rhs = _weighted_caccioppoli(phi, s, l, cfg)
    if rhs <= 0.0:
        raise DegenerateRatioError("solution vanishes on omega")
    return float(np.sum(w0 * ws.weight() * grads**2)) / rhs


def caccioppoli_log_ratio(phi: AdjointField, s: float, l: BoundaryTrajectory, cfg: ProblemConfig) -> float:
    """Natural log of the Caccioppoli ratio, finite where the plain ratio underflows."""
    ws, grads, w0, rhs = _weighted_caccioppoli(phi, s, l, cfg)
    if rhs <= 0.0:
        raise DegenerateRatioError("solution vanishes on omega")
    return _logsumexp(-ws.exponent(), w0 * grads**2) - np.log(rhs)


@dataclass(frozen=True)
class CarlemanTerms:
    lhs: float
    rhs: float
    shift: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def carleman_terms(phi: AdjointField, g, s: float, l: BoundaryTrajectory, cfg: ProblemConfig) -> CarlemanTerms:
    """Both sides of the Carleman inequality, scaled by ``exp(shift)``."""
    vals, grads, x, full = _interior_fields(phi, l, cfg)
    ws = CarlemanWeightSet.build(s, l, cfg)
    th = ws.theta_n[:, None]
    dens = s * th * x**cfg.alpha * grads**2 + s**3 * th**3 * x ** (2.0 - cfg.alpha) * vals**2

    # boundary term at x = l(t)
    V = boundary_gradient(phi, l, cfg)[1:-1]
    lb = l.values[1:-1]
    e_bd = 2.0 * s * ws.theta_n * Phi_weight(lb, cfg)
    e_dom = ws.exponent()
    shift = float(min(e_dom.min(), e_bd.min()))
    wt = guarded_exp(e_dom - shift, ws.exp_guard)

    lhs = float(np.sum(full * wt * dens))
    lhs += s * cfg.dt * float(np.sum(lb**cfg.alpha * guarded_exp(e_bd - shift, ws.exp_guard) * V**2))
    w0 = _window(x, cfg.c, cfg.d, cfg.dt)
    rhs = float(np.sum(w0 * wt * dens))
    if g is not None:
        g = np.asarray(g, dtype=float)[1:-1]
        rhs += float(np.sum(full * wt * g**2))
    return CarlemanTerms(lhs, rhs, shift)


def carleman_ratio(phi: AdjointField, g, s: float, l: BoundaryTrajectory, cfg: ProblemConfig) -> float:
    terms = carleman_terms(phi, g, s, l, cfg)
    if terms.rhs <= 0.0:
        raise DegenerateRatioError("Carleman right-hand side vanishes")
    return terms.ratio


def observability_ratio(phi_T, l: BoundaryTrajectory, cfg: ProblemConfig) -> float:
    """``||phi(0)||^2_{L^2(0, L0)} / int int_omega phi^2`` for the source-free adjoint."""
    phi = solve_adjoint(phi_T, None, l, cfg)
    den = restrict_to_window(phi, l, cfg).norm() ** 2
    if den <= 0.0:
        raise DegenerateRatioError("solution vanishes on omega")
    num = float(np.sum(slice_weights(cfg) * phi.initial**2)) * (l.values[0] / cfg.L0)
    return num / den
