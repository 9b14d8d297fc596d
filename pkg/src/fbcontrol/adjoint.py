"""Backward adjoint solve built as the exact transpose of the forward march.

With physical slice weights ``D_n = J_n * W`` (``W`` trapezoid weights in
zeta) and forward step ``y^{n} = M_n^{-1}(y^{n-1} + dt h^{n})``, the adjoint is

    phi^{n-1} = D_{n-1}^{-1} M_n^{-T} D_n (phi^n - dt g^n),

so that for ``g = 0``

    <phi^Nt, y^Nt>_{D_Nt} - <phi^0, y^0>_{D_0} = sum_n dt <phi^{n-1}, h^n>_{D_{n-1}}

holds to round-off. The right-hand sum defines the space-time pairing used for
controls: the control stored in time row ``n >= 1`` acts on step ``n-1 -> n``
and is paired with the adjoint slice ``n-1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import ProblemConfig, SolverError
from .forward import StepSystem, project_slice, slice_weights, solve_forward, step_system
from .transform import BoundaryTrajectory, omega_indicator_field, transform_coeffs


@dataclass(frozen=True)
class AdjointField:
    data: np.ndarray
    neumann_left: bool

    @property
    def terminal(self) -> np.ndarray:
        return self.data[-1]

    @property
    def initial(self) -> np.ndarray:
        return self.data[0]


@dataclass(frozen=True)
class ControlField:
    """Control samples on the transformed image of the window, with the
    quadrature weights that turn ``sum(weights * v * u)`` into
    ``integral over omega x (0,T) of v u dx dt``.
    """

    data: np.ndarray
    weights: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights * self.data**2)))

    @property
    def support(self) -> np.ndarray:
        return self.weights > 0.0


def solve_adjoint(phi_T, g, l: BoundaryTrajectory, cfg: ProblemConfig, upwind: bool = False,
                  system: StepSystem | None = None) -> AdjointField:
    sys_ = step_system(l, cfg, upwind) if system is None else system
    phi_T = project_slice(phi_T, cfg, "terminal slice")
    shape = (cfg.Nt + 1, cfg.Ns + 1)
    if g is None:
        src = np.zeros(shape)
    else:
        g = np.asarray(g, dtype=float)
        if g.shape != shape:
            raise ValueError(f"source must have shape {shape}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise SolverError("adjoint source contains non-finite values")
        src = cfg.dt * g
    fr = sys_.free
    J = sys_.coeffs.J
    scale = np.ones(cfg.Nt + 1)
    scale[1:] = J[1:] / J[:-1]
    W = slice_weights(cfg)[fr].copy()
    out = np.zeros((cfg.Nt + 1, sys_.di.shape[1]))
    bad = kernels.adjoint_sweep(sys_.lo, sys_.di, sys_.up, W, scale, phi_T[fr],
                                np.ascontiguousarray(src[:, fr]), out)
    if bad >= 0:
        raise SolverError(f"zero pivot in transposed step matrix at time node {bad}")
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite adjoint state")
    data = np.zeros(shape)
    data[:, fr] = out
    return AdjointField(data, cfg.neumann_left)


def slice_inner(u, v, n: int, l: BoundaryTrajectory, cfg: ProblemConfig) -> float:
    """Physical L^2(0, l_n) inner product of two transformed slices."""
    J = l.values[n] / cfg.L0
    return float(J * np.sum(slice_weights(cfg) * np.asarray(u) * np.asarray(v)))


def control_weights(l: BoundaryTrajectory, cfg: ProblemConfig) -> np.ndarray:
    """Quadrature weights of the control pairing, zero outside the window."""
    J = transform_coeffs(l, cfg).J
    chi = omega_indicator_field(l, cfg)
    wts = np.zeros((cfg.Nt + 1, cfg.Ns + 1))
    wts[1:] = cfg.dt * J[:-1, None] * slice_weights(cfg)[None, :] * chi[1:]
    return wts


def observe(phi: AdjointField) -> np.ndarray:
    """Adjoint slices aligned with control rows: row ``n`` holds ``phi^{n-1}``."""
    obs = np.zeros_like(phi.data)
    obs[1:] = phi.data[:-1]
    return obs


def restrict_to_window(phi: AdjointField, l: BoundaryTrajectory, cfg: ProblemConfig) -> ControlField:
    wts = control_weights(l, cfg)
    return ControlField(np.where(wts > 0.0, observe(phi), 0.0), wts)


def window_pairing(v: ControlField, psi: AdjointField) -> float:
    return float(np.sum(v.weights * v.data * observe(psi)))


def duality_gap(v: ControlField, psi_T, y0, l: BoundaryTrajectory, cfg: ProblemConfig) -> float:
    """Normalized ``|int int_omega v psi - (psi_T, y(T)) + (psi(0), y0)|``.

    ``y`` solves the forward problem with source ``v`` and initial slice
    ``y0``; ``psi`` the source-free adjoint with terminal slice ``psi_T``.
    """
    sys_ = step_system(l, cfg)
    y0 = project_slice(y0, cfg, "initial slice")
    psi_T = project_slice(psi_T, cfg, "terminal slice")
    y = solve_forward(y0, v.data, l, cfg, system=sys_)
    psi = solve_adjoint(psi_T, None, l, cfg, system=sys_)
    t_window = window_pairing(v, psi)
    t_final = slice_inner(psi_T, y.final, cfg.Nt, l, cfg)
    t_init = slice_inner(psi.initial, y0, 0, l, cfg)
    scale = max(abs(t_window), abs(t_final), abs(t_init))
    if scale == 0.0:
        return 0.0
    return abs(t_window - t_final + t_init) / scale

