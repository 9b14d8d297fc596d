"""Command-line front end.

Every run writes ``<out>/<subcommand>-<config digest>/`` holding CSV artifacts
and one ``manifest.json`` that lists them.

    fbcontrol control --config run.cfg --set beta=1e-4 --out results
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .adjoint import ControlField, control_weights, duality_gap, solve_adjoint
from .carleman import (CarlemanWeightSet, Phi_weight, caccioppoli_log_ratio, carleman_ratio, hardy_check,
                       observability_ratio, theta)
from .config import ConfigError, FBControlError, ProblemConfig
from .forward import ManufacturedOracle, convergence_study, energy_check, slice_weights, solve_forward, weighted_norms
from .free_boundary import beta_continuation, fixed_point_solve
from .hum import cost_check, hum_solve
from .transform import BoundaryTrajectory, space_nodes, time_nodes

log = logging.getLogger("fbcontrol")

EXIT_CODES = {"config": 2, "domain": 3, "solver": 4, "degenerate": 5, "convergence": 6, "membership": 7, "usage": 8}


class UnknownSubcommandError(FBControlError):
    category = "usage"


# --- configuration ----------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(ProblemConfig)}


def _parse_value(key: str, text: str, where: str):
    if key not in _FIELDS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        return int(text) if _FIELDS[key].type in ("int", int) else float(text)
    except ValueError:
        # ints written as 1e3 or 128.0 are accepted when integral
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"{where}: cannot parse {key} = {text!r}") from None
        if not v.is_integer():
            raise ConfigError(f"{where}: {key} must be an integer, got {text!r}") from None
        return int(v)


def _split_assignment(line: str, where: str):
    if "=" not in line:
        raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
    key, _, value = line.partition("=")
    key, value = key.strip(), value.strip()
    if not key or not value:
        raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
    return key, value


def parse_config(path=None, overrides=()) -> ProblemConfig:
    """Read a flat ``key = value`` file, then apply ``key=value`` overrides."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            key, value = _split_assignment(line, where)
            values[key] = _parse_value(key, value, where)
    for item in overrides:
        key, value = _split_assignment(item, "override")
        values[key] = _parse_value(key, value, f"override {item!r}")
    return ProblemConfig(**values)


# --- manifest ---------------------------------------------------------------

@dataclass
class RunManifest:
    subcommand: str
    config_echo: dict
    metrics: dict = field(default_factory=dict)
    artifact_paths: list = field(default_factory=list)
    wall_time_seconds: float = 0.0
    status: str = "ok"
    error_category: str | None = None
    error_message: str | None = None
    residual_history: list | None = None
    out_dir: Path | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else EXIT_CODES.get(self.error_category, 1)

    def to_json_dict(self) -> dict:
        """Flat object; ``residual_history`` and ``artifact_paths`` are the only arrays."""
        out = {
            "subcommand": self.subcommand,
            "status": self.status,
            "wall_time_seconds": self.wall_time_seconds,
            "artifact_paths": list(self.artifact_paths),
        }
        if not self.ok:
            out["error_category"] = self.error_category
            out["error_message"] = self.error_message
        for k, v in self.config_echo.items():
            out[f"config.{k}"] = v
        out.update(self.metrics)
        if self.residual_history is not None:
            out["residual_history"] = list(self.residual_history)
        return out


class _Run:
    """Collects artifacts and metrics for one pipeline execution."""

    def __init__(self, cfg: ProblemConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.metrics = {}
        self.artifacts = []
        self.residual_history = None

    def csv(self, name, header, columns):
        self.artifacts.append(io.write_csv(self.out_dir / name, header, columns).name)

    def field(self, name, value_name, data):
        io.write_field_csv(self.out_dir / name, value_name, data, time_nodes(self.cfg), space_nodes(self.cfg))
        self.artifacts.append(name)

    def json(self, name, obj):
        io.write_json(self.out_dir / name, obj)
        self.artifacts.append(name)

    def rng(self):
        return np.random.default_rng(self.cfg.seed)


def initial_slice(cfg: ProblemConfig) -> np.ndarray:
    """``eps sin(pi zeta / L0)``, zero at both ends of the transformed interval."""
    y0 = cfg.eps * np.sin(np.pi * space_nodes(cfg) / cfg.L0)
    y0[-1] = 0.0
    y0[0] = 0.0
    return y0


def random_slice(cfg: ProblemConfig, rng) -> np.ndarray:
    u = rng.standard_normal(cfg.Ns + 1)
    u[-1] = 0.0
    if not cfg.neumann_left:
        u[0] = 0.0
    return u


# --- pipelines ---------------------------------------------------------------

def _solve_forward(run: _Run):
    cfg = run.cfg
    l = BoundaryTrajectory.wobble(cfg)
    y0 = initial_slice(cfg)
    w = solve_forward(y0, None, l, cfg)
    norms = weighted_norms(w, l, cfg)
    run.field("state.csv", "w", w.data)
    run.csv("trajectory.csv", "t,l,dl", [time_nodes(cfg), l.values, l.derivs])
    run.metrics.update(
        linf_l2=norms.linf_l2_phys,
        l2_h1a=norms.l2_h1a_phys,
        energy_ratio=energy_check(w, y0, None, l, cfg),
        terminal_norm=float(np.sqrt(np.sum(slice_weights(cfg) * w.final**2) * l.values[-1] / cfg.L0)),
    )


def _solve_adjoint(run: _Run):
    cfg = run.cfg
    rng = run.rng()
    l = BoundaryTrajectory.wobble(cfg)
    phi_T = random_slice(cfg, rng)
    phi = solve_adjoint(phi_T, None, l, cfg)
    run.field("adjoint.csv", "phi", phi.data)
    wts = control_weights(l, cfg)
    v = ControlField(np.where(wts > 0, rng.standard_normal(wts.shape), 0.0), wts)
    run.metrics.update(
        duality_gap=duality_gap(v, random_slice(cfg, rng), random_slice(cfg, rng), l, cfg),
        observability_ratio=observability_ratio(phi_T, l, cfg),
    )


def _control(run: _Run):
    cfg = run.cfg
    l = BoundaryTrajectory.wobble(cfg)
    y0 = initial_slice(cfg)
    v, rep = hum_solve(y0, l, cfg)
    run.field("control.csv", "v", v.data)
    run.field("state.csv", "w", rep.state.data)
    run.metrics.update(
        iterations=rep.iterations,
        final_terminal_norm=rep.final_terminal_norm,
        control_norm=rep.control_norm,
        cost_ratio=cost_check(rep, y0, cfg),
        beta=cfg.beta,
    )
    run.residual_history = rep.residual_history
    run.json("hum_report.json", rep.to_json_dict())


def _free_boundary(run: _Run):
    cfg = run.cfg
    rep = fixed_point_solve(initial_slice(cfg), cfg)
    run.csv("trajectory.csv", "t,l,dl", [time_nodes(cfg), rep.trajectory.values, rep.trajectory.derivs])
    run.field("control.csv", "v", rep.control.data)
    run.metrics.update(
        outer_iterations=rep.outer_iterations,
        ode_residual=rep.ode_residual,
        terminal_norm=rep.terminal_norm,
        holder_norm=rep.holder_norm,
        control_norm=rep.control_norm,
        final_c1_distance=rep.c1_distance_history[-1],
        beta=cfg.beta,
    )
    run.residual_history = rep.hum.residual_history
    run.json("fixed_point_report.json", rep.to_json_dict())


def _beta_sweep(run: _Run):
    cfg = run.cfg
    betas = [10.0 * cfg.beta, cfg.beta, 0.1 * cfg.beta]
    res = beta_continuation(initial_slice(cfg), cfg, betas)
    t = time_nodes(cfg)
    for k, rep in enumerate(res.reports):
        run.csv(f"trajectory_{k:02d}.csv", "t,l,dl", [t, rep.trajectory.values, rep.trajectory.derivs])
    run.csv("continuation.csv", "beta,control_norm", [betas, res.control_norms])
    d = res.distances
    norms = res.control_norms
    run.metrics.update({f"c1_distance_{k}": v for k, v in enumerate(d)})
    run.metrics.update({f"control_norm_{k}": v for k, v in enumerate(norms)})
    run.metrics["distances_decreasing"] = int(all(b < a for a, b in zip(d, d[1:])))
    run.metrics["control_norm_band"] = max(norms) / min(norms) if min(norms) > 0 else float("inf")
    run.json("beta_sweep.json", res.to_json_dict())


def _carleman_scan(run: _Run, samples: int = 10):
    cfg = run.cfg
    rng = run.rng()
    l = BoundaryTrajectory.constant(cfg)
    x = np.linspace(0.0, cfg.B, 1001)
    run.csv("weights_Phi.csv", "x,Phi", [x, Phi_weight(x, cfg)])
    t = time_nodes(cfg)[1:-1]
    run.csv("weights_theta.csv", "t,theta", [t, theta(t, cfg.T)])
    s_vals = [cfg.s0, 2.0 * cfg.s0, 4.0 * cfg.s0]
    rows_s, rows_r, obs, cacc_ok = [], [], [], True
    for _ in range(samples):
        phi_T = random_slice(cfg, rng)
        phi = solve_adjoint(phi_T, None, l, cfg)
        logs = [caccioppoli_log_ratio(phi, s, l, cfg) for s in s_vals]
        cacc_ok &= all(b <= a for a, b in zip(logs, logs[1:]))
        for s in s_vals:
            rows_s.append(s)
            rows_r.append(carleman_ratio(phi, None, s, l, cfg))
        obs.append(observability_ratio(phi_T, l, cfg))
    run.csv("carleman_scan.csv", "s,ratio", [rows_s, rows_r])
    ws = CarlemanWeightSet.build(cfg.s0, l, cfg)
    run.metrics.update(
        carleman_max_over_median=float(np.max(rows_r) / np.median(rows_r)),
        carleman_max=float(np.max(rows_r)),
        observability_max=float(np.max(obs)),
        caccioppoli_monotone=int(cacc_ok),
        min_Phi=float(np.min(ws.Phi_j)),
    )


def random_hardy_profile(rng, alpha_star: float, n: int = 64, l_t: float = 1.0) -> np.ndarray:
    """Random piecewise-linear nodal values vanishing where the regime requires."""
    z = np.cumsum(rng.standard_normal(n + 1)) * np.sqrt(l_t / n)
    if alpha_star < 1.0:
        z -= z[0]
    else:
        z -= z[-1]
    return z


def _hardy_check(run: _Run, samples: int = 100):
    rng = run.rng()
    a_col, lhs_col, rhs_col = [], [], []
    for a in (0.0, 0.5, 1.5, 1.9):
        for _ in range(samples):
            lhs, rhs = hardy_check(random_hardy_profile(rng, a), a)
            a_col.append(a)
            lhs_col.append(lhs)
            rhs_col.append(rhs)
    run.csv("hardy.csv", "alpha_star,lhs,rhs", [a_col, lhs_col, rhs_col])
    ratios = np.asarray(lhs_col) / np.asarray(rhs_col)
    case1 = hardy_check(np.linspace(0.0, 1.0, 65), 0.0)
    case2 = hardy_check(1.0 - np.linspace(0.0, 1.0, 65), 1.5)
    run.metrics.update(
        max_lhs_over_rhs=float(ratios.max()),
        analytic_case1_error=max(abs(case1[0] - 1.0), abs(case1[1] - 4.0)),
        analytic_case2_error=max(abs(case2[0] - 16.0 / 15.0), abs(case2[1] - 6.4)),
    )


def _convergence(run: _Run):
    cfg = run.cfg
    oracle = ManufacturedOracle(cfg.alpha, T=cfg.T, L0=cfg.L0)
    space = convergence_study(oracle, [(n, n * n // 4) for n in (32, 64, 128)], "space")
    time_ = convergence_study(oracle, [(256, n) for n in (16, 32, 64)], "time")
    run.csv("convergence_space.csv", "h,error", [space.steps, space.errors])
    run.csv("convergence_time.csv", "h,error", [time_.steps, time_.errors])
    run.metrics.update(space_order=space.order, time_order=time_.order)


SUBCOMMANDS = {
    "solve-forward": _solve_forward,
    "solve-adjoint": _solve_adjoint,
    "control": _control,
    "free-boundary": _free_boundary,
    "beta-sweep": _beta_sweep,
    "carleman-scan": _carleman_scan,
    "hardy-check": _hardy_check,
    "convergence": _convergence,
}


def run_subcommand(name: str, cfg: ProblemConfig, out_root=".", out_dir=None) -> RunManifest:
    """Run one pipeline and write its artifacts plus ``manifest.json``.

    Module errors are caught and recorded in the manifest (``status = "failed"``).
    """
    if name not in SUBCOMMANDS:
        raise UnknownSubcommandError(f"unknown subcommand {name!r}; choose from {', '.join(SUBCOMMANDS)}")
    out_dir = Path(out_root) / f"{name}-{cfg.digest()}" if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = _Run(cfg, out_dir)
    manifest = RunManifest(name, cfg.as_dict(), out_dir=out_dir)
    start = time.perf_counter()
    try:
        SUBCOMMANDS[name](run)
    except FBControlError as err:
        manifest.status = "failed"
        manifest.error_category = err.category
        manifest.error_message = str(err)
        log.error("%s failed (%s): %s", name, err.category, err)
    manifest.wall_time_seconds = time.perf_counter() - start
    manifest.metrics = run.metrics
    manifest.artifact_paths = list(run.artifacts)
    manifest.residual_history = run.residual_history
    io.write_json(out_dir / "manifest.json", manifest.to_json_dict())
    return manifest


def sweep(configs, subcommand: str, out_root, max_workers: int | None = None) -> list:
    """Run independent configs concurrently; entry ``i`` writes under ``<out_root>/<i:03d>/``."""
    configs = list(configs)
    if subcommand not in SUBCOMMANDS:
        raise UnknownSubcommandError(f"unknown subcommand {subcommand!r}")
    out_root = Path(out_root)

    def one(item):
        i, cfg = item
        return run_subcommand(subcommand, cfg, out_root / f"{i:03d}")

    if not configs:
        return []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, enumerate(configs)))


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbcontrol", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS), help="pipeline to run")
    parser.add_argument("--config", type=Path, default=None, help="flat key = value parameter file")
    parser.add_argument("--out", type=Path, default=Path("results"), help="output root directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter (repeatable)")
    parser.add_argument("--seed", type=int, default=None, help="random seed for property sweeps")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as err:
        print(f"error [config]: {err}", file=sys.stderr)
        return EXIT_CODES["config"]
    manifest = run_subcommand(args.subcommand, cfg, args.out)
    print(manifest.out_dir / "manifest.json")
    if not manifest.ok:
        print(f"error [{manifest.error_category}]: {manifest.error_message}", file=sys.stderr)
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
