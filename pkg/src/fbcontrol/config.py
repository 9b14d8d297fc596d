"""Problem parameters and the exception hierarchy shared by all modules."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass


class FBControlError(Exception):
    """Base class for every error raised by this package."""

    category = "error"


class ConfigError(FBControlError):
    category = "config"


class DomainError(FBControlError):
    """A position or trajectory lies outside its admissible domain."""

    category = "domain"


class SolverError(FBControlError):
    """Singular step matrix or non-finite values during time stepping."""

    category = "solver"


class DegenerateRatioError(FBControlError):
    """Both sides of a measured inequality vanish (or the denominator does)."""

    category = "degenerate"


class ConvergenceError(FBControlError):
    category = "convergence"

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class MembershipError(FBControlError):
    """An iterate of the boundary fixed-point map left the admissible set."""

    category = "membership"

    def __init__(self, message, iterate=None, constraint=None, index=None):
        super().__init__(message)
        self.iterate = iterate
        self.constraint = constraint
        self.index = index


@dataclass(frozen=True)
class ProblemConfig:
    """Full parameter set of a run.

    Geometry: control window ``omega = (a, b)``, inner window ``omega0 = (c, d)``
    and ``0 < a < c < d < b < Lstar < L0 <= B``.
    """

    alpha: float = 0.5
    T: float = 1.0
    L0: float = 1.0
    Lstar: float = 0.8
    B: float = 1.3
    a: float = 0.2
    b: float = 0.5
    c: float = 0.25
    d: float = 0.45
    R: float = 0.5
    beta: float = 1e-3
    Ns: int = 128
    Nt: int = 256
    # run settings (not part of the physical model)
    eps: float = 0.05
    wobble: float = 0.05
    s0: float = 50.0
    kappa: float = 0.5
    gamma: float = 1.0
    tol_fp: float = 1e-6
    max_outer: int = 30
    cg_maxiter: int = 500
    seed: int = 42

    def __post_init__(self):
        # frozen: coerce through object.__setattr__
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.type in ("int", int):
                if isinstance(v, float) and not v.is_integer():
                    raise ConfigError(f"{f.name} must be an integer, got {v}")
                object.__setattr__(self, f.name, int(v))
            else:
                object.__setattr__(self, f.name, float(v))
        self.validate()

    def validate(self):
        if not (0.0 <= self.alpha < 2.0):
            raise ConfigError(
                f"alpha must lie in [0,2) (null controllability may fail for alpha >= 2); got {self.alpha}"
            )
        if not (0 < self.a < self.c < self.d < self.b < self.Lstar < self.L0 <= self.B):
            raise ConfigError(
                "geometry must satisfy 0 < a < c < d < b < Lstar < L0 <= B; got "
                f"a={self.a}, c={self.c}, d={self.d}, b={self.b}, Lstar={self.Lstar}, L0={self.L0}, B={self.B}"
            )
        if self.T <= 0:
            raise ConfigError(f"T must be > 0; got {self.T}")
        if self.R <= 0:
            raise ConfigError(f"R must be > 0; got {self.R}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be > 0; got {self.beta}")
        if self.Ns < 8 or self.Nt < 8:
            raise ConfigError(f"Ns and Nt must be >= 8; got Ns={self.Ns}, Nt={self.Nt}")
        if not (0 < self.kappa <= 1):
            raise ConfigError(f"kappa must lie in (0,1]; got {self.kappa}")
        if not (0 < self.gamma <= 1):
            raise ConfigError(f"gamma must lie in (0,1]; got {self.gamma}")

    @property
    def dz(self) -> float:
        return self.L0 / self.Ns

    @property
    def dt(self) -> float:
        return self.T / self.Nt

    @property
    def neumann_left(self) -> bool:
        """Strong degeneracy (alpha >= 1) switches x=0 to the weighted Neumann condition."""
        return self.alpha >= 1.0

    def replace(self, **changes) -> "ProblemConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def reference_config(**changes) -> ProblemConfig:
    """Small-data free-boundary reference case (alpha=0.5, T=1, Ns=128, Nt=256)."""
    return ProblemConfig(**changes)


def control_reference_config(**changes) -> ProblemConfig:
    """Reference geometry with a short horizon, so that free decay alone leaves
    ``||y(T)||`` well above every target in the beta sweep {1e-2, 1e-3, 1e-4}.
    """
    base = dict(T=0.1, eps=0.1, Nt=128)
    base.update(changes)
    return ProblemConfig(**base)
