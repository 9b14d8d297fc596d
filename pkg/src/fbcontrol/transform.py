"""Change of variables between the moving domain 0 < x < l(t) and the fixed
interval 0 < zeta < L0, plus the quadrature helpers built on it.

With ``zeta = L0 * x / l(t)`` the state ``w(zeta, t) = y(x, t)`` satisfies

    w_t - p(t) (zeta^alpha w_zeta)_zeta - q(t) zeta w_zeta = h,
    p = (l / L0)^(alpha - 2),   q = l' / l,

and physical lengths pick up the Jacobian ``J = l / L0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DomainError, ProblemConfig


@dataclass(frozen=True)
class BoundaryTrajectory:
    """Boundary position ``values[n] = l(t_n)`` and derivative ``derivs[n] = l'(t_n)``
    on the uniform nodes ``t_n = n * T / Nt``.
    """

    values: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        dv = np.array(self.derivs, dtype=float)
        if v.ndim != 1 or v.shape != dv.shape:
            raise ValueError("values and derivs must be 1-D arrays of equal length")
        v.flags.writeable = False
        dv.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "derivs", dv)

    def __len__(self):
        return self.values.shape[0]

    @classmethod
    def constant(cls, cfg: ProblemConfig, value: float | None = None) -> "BoundaryTrajectory":
        value = cfg.L0 if value is None else value
        return cls(np.full(cfg.Nt + 1, value), np.zeros(cfg.Nt + 1))

    @classmethod
    def from_functions(cls, f, df, cfg: ProblemConfig) -> "BoundaryTrajectory":
        t = time_nodes(cfg)
        return cls(np.asarray(f(t), dtype=float) * np.ones_like(t), np.asarray(df(t), dtype=float) * np.ones_like(t))

    @classmethod
    def wobble(cls, cfg: ProblemConfig, amplitude: float | None = None) -> "BoundaryTrajectory":
        """``l(t) = L0 + A sin(2 pi t / T)`` with its exact derivative."""
        A = cfg.wobble if amplitude is None else amplitude
        w = 2.0 * np.pi / cfg.T
        return cls.from_functions(lambda t: cfg.L0 + A * np.sin(w * t), lambda t: A * w * np.cos(w * t), cfg)

    def consistency_error(self, dt: float) -> float:
        """max_n |(l[n+1]-l[n])/dt - (l'[n]+l'[n+1])/2|."""
        slope = np.diff(self.values) / dt
        mean = 0.5 * (self.derivs[1:] + self.derivs[:-1])
        return float(np.max(np.abs(slope - mean))) if slope.size else 0.0

    def c1_distance(self, other: "BoundaryTrajectory") -> float:
        """Discrete C^1 distance: max value gap + max derivative gap."""
        return float(np.max(np.abs(self.values - other.values)) + np.max(np.abs(self.derivs - other.derivs)))

    def blend(self, other: "BoundaryTrajectory", gamma: float) -> "BoundaryTrajectory":
        """``(1 - gamma) * self + gamma * other``."""
        return BoundaryTrajectory(
            (1.0 - gamma) * self.values + gamma * other.values,
            (1.0 - gamma) * self.derivs + gamma * other.derivs,
        )


@dataclass(frozen=True)
class TransformCoeffs:
    p: np.ndarray
    q: np.ndarray
    J: np.ndarray


def time_nodes(cfg: ProblemConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.T, cfg.Nt + 1)


def space_nodes(cfg: ProblemConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.L0, cfg.Ns + 1)


def trapezoid_weights(n_cells: int, h: float) -> np.ndarray:
    w = np.full(n_cells + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _check_length(l: BoundaryTrajectory, cfg: ProblemConfig):
    if len(l) != cfg.Nt + 1:
        raise ValueError(f"trajectory has {len(l)} nodes, expected Nt+1 = {cfg.Nt + 1}")


def transform_coeffs(l: BoundaryTrajectory, cfg: ProblemConfig) -> TransformCoeffs:
    _check_length(l, cfg)
    if np.any(l.values <= 0.0):
        n = int(np.argmax(l.values <= 0.0))
        raise DomainError(f"boundary must stay positive; l[{n}] = {l.values[n]}")
    ratio = l.values / cfg.L0
    return TransformCoeffs(p=ratio ** (cfg.alpha - 2.0), q=l.derivs / l.values, J=ratio)


def map_coordinates(x, n: int, l: BoundaryTrajectory, cfg: ProblemConfig):
    """Physical position at time node ``n`` to ``zeta = L0 x / l_n``."""
    ln = l.values[n]
    x = np.asarray(x, dtype=float)
    slack = ln / cfg.Ns
    if np.any(x < -slack) or np.any(x > ln + slack):
        raise DomainError(f"position outside [0, l_n] = [0, {ln}] at time node {n}")
    return cfg.L0 * x / ln


def unmap_coordinates(zeta, n: int, l: BoundaryTrajectory, cfg: ProblemConfig):
    zeta = np.asarray(zeta, dtype=float)
    slack = cfg.dz
    if np.any(zeta < -slack) or np.any(zeta > cfg.L0 + slack):
        raise DomainError(f"transformed position outside [0, L0] = [0, {cfg.L0}]")
    return zeta * l.values[n] / cfg.L0


def pushforward_gradient(w_slice, n: int, l: BoundaryTrajectory, cfg: ProblemConfig) -> np.ndarray:
    """Physical gradient ``y_x = (L0 / l_n) w_zeta`` at the mapped nodes.

    Centered differences inside, one-sided second order at both ends.
    """
    w_slice = np.asarray(w_slice, dtype=float)
    if w_slice.shape != (cfg.Ns + 1,):
        raise ValueError(f"slice must have Ns+1 = {cfg.Ns + 1} values, got shape {w_slice.shape}")
    return np.gradient(w_slice, cfg.dz, edge_order=2) * (cfg.L0 / l.values[n])


def physical_nodes(l: BoundaryTrajectory, cfg: ProblemConfig) -> np.ndarray:
    """(Nt+1, Ns+1) array of physical node positions ``x = zeta l_n / L0``."""
    return np.outer(l.values / cfg.L0, space_nodes(cfg))


def omega_indicator(n: int, l: BoundaryTrajectory, cfg: ProblemConfig, window=None) -> np.ndarray:
    """0/1 weight per node: 1 when the node's physical image lies in the open window.

    The window defaults to the control region ``(a, b)``.
    """
    lo, hi = (cfg.a, cfg.b) if window is None else window
    x = space_nodes(cfg) * (l.values[n] / cfg.L0)
    return ((x > lo) & (x < hi)).astype(float)


def omega_indicator_field(l: BoundaryTrajectory, cfg: ProblemConfig, window=None) -> np.ndarray:
    lo, hi = (cfg.a, cfg.b) if window is None else window
    x = physical_nodes(l, cfg)
    return ((x > lo) & (x < hi)).astype(float)


def clipped_window_weights(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Nodal weights ``w`` with ``sum(w * f) = integral over (lo, hi) of the
    piecewise-linear interpolant of ``f`` on the increasing nodes ``x``.
    """
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    x0, x1 = x[:-1], x[1:]
    h = x1 - x0
    u = np.clip(x0, lo, hi)
    v = np.clip(x1, lo, hi)
    live = v > u
    if not np.any(live):
        return w
    u, v, x0, x1, h = u[live], v[live], x0[live], x1[live], h[live]
    # integral of the hat pieces (x1 - s)/h and (s - x0)/h over [u, v]
    left = ((x1 - u) ** 2 - (x1 - v) ** 2) / (2.0 * h)
    right = ((v - x0) ** 2 - (u - x0) ** 2) / (2.0 * h)
    idx = np.nonzero(live)[0]
    np.add.at(w, idx, left)
    np.add.at(w, idx + 1, right)
    return w
