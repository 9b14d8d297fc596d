"""Implicit-Euler solver for the transformed degenerate problem on (0, L0) x (0, T).

Vertex-centred conservative differences: node ``j`` sits at ``zeta_j = j dz`` and
the diffusive flux through face ``j+1/2`` uses the face weight
``(zeta_{j+1/2})^alpha``, so the degenerate coefficient is never evaluated at
``zeta = 0``. For ``alpha >= 1`` node 0 is unknown and owns the half cell
``[0, dz/2]`` whose outer flux is zero; for ``alpha < 1`` it is pinned to 0.
The right node ``zeta = L0`` is always pinned to 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import ProblemConfig, SolverError
from .transform import BoundaryTrajectory, TransformCoeffs, space_nodes, transform_coeffs, trapezoid_weights


@dataclass(frozen=True)
class SpaceGrid:
    Ns: int
    dz: float

    @classmethod
    def from_config(cls, cfg: ProblemConfig) -> "SpaceGrid":
        return cls(cfg.Ns, cfg.dz)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.Ns + 1) * self.dz

    @property
    def faces(self) -> np.ndarray:
        return (np.arange(self.Ns) + 0.5) * self.dz


@dataclass(frozen=True)
class TransformedField:
    """Space-time samples ``data[n, j] = w(zeta_j, t_n)``."""

    data: np.ndarray
    neumann_left: bool

    @property
    def final(self) -> np.ndarray:
        return self.data[-1]


@dataclass(frozen=True)
class WeightedNorms:
    linf_l2: float
    l2_h1a: float
    linf_l2_phys: float
    l2_h1a_phys: float


@dataclass(frozen=True)
class StepSystem:
    """Per-step tridiagonal matrices ``M[n] = I - dt A[n]`` on the free nodes."""

    lo: np.ndarray
    di: np.ndarray
    up: np.ndarray
    free: slice
    coeffs: TransformCoeffs


def free_nodes(cfg: ProblemConfig) -> slice:
    return slice(0, cfg.Ns) if cfg.neumann_left else slice(1, cfg.Ns)


def slice_weights(cfg: ProblemConfig) -> np.ndarray:
    """Trapezoid weights in zeta (Ns+1 values, no Jacobian)."""
    return trapezoid_weights(cfg.Ns, cfg.dz)


def step_system(l: BoundaryTrajectory, cfg: ProblemConfig, upwind: bool = False) -> StepSystem:
    coeffs = transform_coeffs(l, cfg)
    Ns, dz, dt, alpha = cfg.Ns, cfg.dz, cfg.dt, cfg.alpha
    face = ((np.arange(Ns) + 0.5) * dz) ** alpha  # face j+1/2, j = 0..Ns-1
    p = coeffs.p[:, None]
    q = coeffs.q[:, None]
    nt = cfg.Nt + 1

    # operator A on nodes 0..Ns-1 (node Ns is the pinned right boundary)
    j = np.arange(Ns, dtype=float)[None, :]
    a_lo = np.zeros((nt, Ns))
    a_up = np.zeros((nt, Ns))
    a_lo[:, 1:] = p * face[None, :-1] / dz**2
    a_up[:, 1:] = p * face[None, 1:] / dz**2
    # Neumann half cell at node 0: only the face 1/2 flux, doubled volume factor
    a_up[:, 0] = (2.0 * p * face[0] / dz**2)[:, 0]
    a_di = -(a_lo + a_up)

    if upwind:
        qpos = np.maximum(q, 0.0)
        qneg = np.minimum(q, 0.0)
        a_up += qpos * j
        a_di += -qpos * j + qneg * j
        a_lo += -qneg * j
    else:
        a_up += 0.5 * q * j
        a_lo -= 0.5 * q * j

    lo, di, up = -dt * a_lo, 1.0 - dt * a_di, -dt * a_up
    fr = free_nodes(cfg)
    lo, di, up = lo[:, fr].copy(), di[:, fr].copy(), up[:, fr].copy()
    lo[:, 0] = 0.0
    up[:, -1] = 0.0
    return StepSystem(lo, di, up, fr, coeffs)


def _boundary_tolerance(v: np.ndarray) -> float:
    return 1e-8 * max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)


def project_slice(w: np.ndarray, cfg: ProblemConfig, name: str = "slice") -> np.ndarray:
    """Zero the pinned nodes after checking they are (numerically) zero already."""
    w = np.array(w, dtype=float)
    if w.shape != (cfg.Ns + 1,):
        raise ValueError(f"{name} must have Ns+1 = {cfg.Ns + 1} values, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise SolverError(f"{name} contains non-finite values")
    tol = _boundary_tolerance(w)
    pinned = [cfg.Ns] if cfg.neumann_left else [0, cfg.Ns]
    for k in pinned:
        if abs(w[k]) > tol:
            raise ValueError(f"{name} violates the boundary condition at node {k}: {w[k]}")
        w[k] = 0.0
    return w


def _source_array(h, cfg: ProblemConfig) -> np.ndarray:
    shape = (cfg.Nt + 1, cfg.Ns + 1)
    if h is None:
        return np.zeros(shape)
    h = np.asarray(h, dtype=float)
    if h.shape != shape:
        raise ValueError(f"source must have shape {shape}, got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise SolverError("source contains non-finite values")
    return h


def solve_forward(w0, h, l: BoundaryTrajectory, cfg: ProblemConfig, upwind: bool = False,
                  system: StepSystem | None = None) -> TransformedField:
    """Implicit Euler: ``(I - dt A_{n+1}) w^{n+1} = w^n + dt h^{n+1}``.

    ``h`` has shape ``(Nt+1, Ns+1)``; row 0 is never used. ``None`` means no source.
    """
    sys_ = step_system(l, cfg, upwind) if system is None else system
    w0 = project_slice(w0, cfg, "initial slice")
    src = cfg.dt * _source_array(h, cfg)
    fr = sys_.free
    out = np.zeros((cfg.Nt + 1, sys_.di.shape[1]))
    bad = kernels.forward_sweep(sys_.lo, sys_.di, sys_.up, w0[fr], np.ascontiguousarray(src[:, fr]), out)
    if bad >= 0:
        raise SolverError(f"zero pivot in step matrix at time node {bad} (invalid coefficients?)")
    if not np.all(np.isfinite(out)):
        n = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise SolverError(f"non-finite state at time node {n}; check coefficients and data")
    data = np.zeros((cfg.Nt + 1, cfg.Ns + 1))
    data[:, fr] = out
    return TransformedField(data, cfg.neumann_left)


def gradient_energy(w_slice: np.ndarray, cfg: ProblemConfig) -> float:
    """Face-based ``integral of zeta^alpha w_zeta^2`` over (0, L0)."""
    face = ((np.arange(cfg.Ns) + 0.5) * cfg.dz) ** cfg.alpha
    return float(np.sum(face * np.diff(w_slice) ** 2) / cfg.dz)


def weighted_norms(w: TransformedField, l: BoundaryTrajectory, cfg: ProblemConfig) -> WeightedNorms:
    coeffs = transform_coeffs(l, cfg)
    W = slice_weights(cfg)
    l2sq = (w.data**2) @ W
    face = ((np.arange(cfg.Ns) + 0.5) * cfg.dz) ** cfg.alpha
    grad = (np.diff(w.data, axis=1) ** 2) @ face / cfg.dz
    # time rule matches implicit Euler: dissipation is counted at the new level
    dissip = cfg.dt * coeffs.p[1:] * grad[1:]
    return WeightedNorms(
        linf_l2=float(np.sqrt(l2sq.max())),
        l2_h1a=float(dissip.sum()),
        linf_l2_phys=float(np.sqrt((coeffs.J * l2sq).max())),
        l2_h1a_phys=float((dissip * coeffs.J[1:]).sum()),
    )


def source_norm_sq(h, cfg: ProblemConfig) -> float:
    h = _source_array(h, cfg)
    return float(cfg.dt * np.sum((h[1:] ** 2) @ slice_weights(cfg)))


def energy_check(w: TransformedField, w0, h, l: BoundaryTrajectory, cfg: ProblemConfig) -> float:
    """Measured ``(sup_t ||w||^2 + int int p zeta^alpha w_zeta^2) / (e^{T(||q||+1)} (||h||^2 + ||w0||^2))``."""
    norms = weighted_norms(w, l, cfg)
    lhs = norms.linf_l2**2 + norms.l2_h1a
    q = transform_coeffs(l, cfg).q
    w0 = np.asarray(w0, dtype=float)
    data = source_norm_sq(h, cfg) + float(w0**2 @ slice_weights(cfg))
    rhs = np.exp(cfg.T * (np.max(np.abs(q)) + 1.0)) * data
    if rhs == 0.0:
        if lhs == 0.0:
            return 0.0
        raise SolverError("non-zero solution from zero data")
    return float(lhs / rhs)


def max_principle_check(w: TransformedField, w0, h, T: float) -> float:
    """Measured ``||w||_inf / (T ||h||_inf + ||w0||_inf)``; meaningful with upwind advection."""
    w0 = np.asarray(w0, dtype=float)
    hmax = 0.0 if h is None else float(np.max(np.abs(np.asarray(h)[1:])))
    denom = T * hmax + float(np.max(np.abs(w0)))
    top = float(np.max(np.abs(w.data)))
    if denom == 0.0:
        if top == 0.0:
            return 0.0
        raise SolverError("non-zero solution from zero data")
    return top / denom


# --- convergence oracles -------------------------------------------------


@dataclass(frozen=True)
class HeatOracle:
    """alpha = 0 on a fixed interval of length 1: ``w = exp(-pi^2 t) sin(pi zeta)``."""

    T: float = 0.1

    def config(self, Ns: int, Nt: int) -> ProblemConfig:
        return ProblemConfig(alpha=0.0, T=self.T, Ns=Ns, Nt=Nt)

    def exact(self, zeta, t):
        return np.exp(-np.pi**2 * t) * np.sin(np.pi * zeta)

    def error(self, Ns: int, Nt: int) -> float:
        cfg = self.config(Ns, Nt)
        z = space_nodes(cfg)
        t = np.linspace(0.0, cfg.T, Nt + 1)
        w0 = self.exact(z, 0.0)
        w0[[0, -1]] = 0.0
        w = solve_forward(w0, None, BoundaryTrajectory.constant(cfg), cfg)
        return float(np.max(np.abs(w.data - self.exact(z[None, :], t[:, None]))))


@dataclass(frozen=True)
class ManufacturedOracle:
    """``w* = exp(-t) zeta^2 (L0 - zeta)`` on a fixed boundary (p = 1, q = 0).

    The source is the analytic residual
    ``h = -w* - exp(-t) (2 L0 (1+alpha) zeta^alpha - 3 (2+alpha) zeta^(1+alpha))``.
    """

    alpha: float
    T: float = 1.0
    L0: float = 1.0

    def config(self, Ns: int, Nt: int) -> ProblemConfig:
        # geometry scaled to L0 so the config validates for any L0
        L0 = self.L0
        return ProblemConfig(alpha=self.alpha, T=self.T, L0=L0, Lstar=0.8 * L0, B=1.3 * L0,
                             a=0.2 * L0, c=0.25 * L0, d=0.45 * L0, b=0.5 * L0, Ns=Ns, Nt=Nt)

    def exact(self, zeta, t):
        return np.exp(-t) * zeta**2 * (self.L0 - zeta)

    def source(self, zeta, t):
        a, L0 = self.alpha, self.L0
        flux_div = 2.0 * L0 * (1.0 + a) * zeta**a - 3.0 * (2.0 + a) * zeta ** (1.0 + a)
        return -self.exact(zeta, t) - np.exp(-t) * flux_div

    def error(self, Ns: int, Nt: int) -> float:
        cfg = self.config(Ns, Nt)
        z = space_nodes(cfg)[None, :]
        t = np.linspace(0.0, cfg.T, Nt + 1)[:, None]
        h = self.source(z, t)
        w = solve_forward(self.exact(z[0], 0.0), h, BoundaryTrajectory.constant(cfg), cfg)
        return float(np.max(np.abs(w.data - self.exact(z, t))))


@dataclass(frozen=True)
class ConvergenceResult:
    steps: tuple
    errors: tuple
    order: float


def observed_order(steps, errors) -> float:
    """Least-squares slope of log(error) against log(step)."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if steps.size < 3:
        raise ValueError("need at least 3 refinement levels")
    if np.unique(steps).size != steps.size:
        raise ValueError("refinement levels must be distinct; order undefined")
    if np.any(errors <= 0.0):
        raise ValueError("errors must be positive to fit an order")
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


def convergence_study(oracle, levels, kind: str = "space") -> ConvergenceResult:
    """Run ``oracle.error(Ns, Nt)`` on each ``(Ns, Nt)`` level and fit the order.

    ``kind`` selects the step used as abscissa: ``"space"`` (dz = L0/Ns) or
    ``"time"`` (dt = T/Nt).
    """
    levels = [tuple(map(int, lv)) for lv in levels]
    if len(levels) < 3:
        raise ValueError("need at least 3 refinement levels")
    if len(set(levels)) != len(levels):
        raise ValueError("identical grids repeated; order undefined")
    errors = [oracle.error(Ns, Nt) for Ns, Nt in levels]
    if kind == "space":
        steps = [1.0 / Ns for Ns, _ in levels]
    elif kind == "time":
        steps = [1.0 / Nt for _, Nt in levels]
    else:
        raise ValueError(f"kind must be 'space' or 'time', got {kind!r}")
    return ConvergenceResult(tuple(steps), tuple(errors), observed_order(steps, errors))
