"""Run one experiment end to end and write its artifacts."""

from __future__ import annotations

import json
import logging
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bounds import BoundReport, build_report
from .config import ExperimentConfig, to_ini
from .diagnostics import (
    EnergyRecord,
    columns,
    energy_inequality_residual,
    finalize_averages,
    measure_scheme_constant,
    record,
    residual_tolerance,
    write_timeseries,
)
from .errors import BlowUpError, ConfigError, NonFiniteError, SupportError
from .forcing import build_force, continuum_norms, grashof, lattice_norms, validate_conditions
from .solver import SimConfig, save_checkpoint, trajectory

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_NONFINITE = 4
EXIT_DISK = 5

# headroom on the Richardson estimate of C, which is exact only for a pure dt^2 error
SCHEME_SAFETY = 2.0
OUTPUT_ROOT_ENV = "DAMPEDNS_OUTPUT_ROOT"
MODEL_NOTE = "periodic box [0, L]^3 stands in for R^3; finite-horizon averages stand in for limsup"


@dataclass
class RunResult:
    exit_code: int
    output_dir: Path | None = None
    report: BoundReport | None = None
    message: str = ""
    files: list[Path] = field(default_factory=list)


def output_directory(cfg: ExperimentConfig, override: str | os.PathLike | None = None) -> Path:
    path = Path(override) if override is not None else Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def sim_config(cfg: ExperimentConfig, beta: float, dt_scale: float = 1.0) -> SimConfig:
    return SimConfig(
        nu=cfg.nu,
        beta=beta,
        grid=cfg.grid,
        dt=cfg.dt.resolve(beta) * dt_scale,
        t_end=cfg.t_end.resolve(beta),
        alpha=cfg.alpha,
        delta=cfg.delta,
        epsilon=cfg.epsilon,
        burn_in=cfg.burn_in.resolve(beta),
        transport=cfg.transport,
        cfl=cfg.cfl,
        initial_condition=cfg.initial,
    )


def integrate(sim: SimConfig, force) -> tuple[list[EnergyRecord], object]:
    """Run the solver, recording every step; return the records and the final state."""
    records, state = [], None
    for state in trajectory(sim, force):
        records.append(record(state, sim, force))
    return records, state


def run_experiment(
    cfg: ExperimentConfig,
    output_dir: str | os.PathLike | None = None,
    figures: bool = True,
) -> RunResult:
    """Run ``cfg`` and write timeseries.csv, report.json, run_meta.json (+ figures, checkpoint).

    Never raises for the documented failure classes; they map to exit codes
    2 (config), 3 (blow-up), 4 (non-finite), 5 (disk).
    """
    started = time.perf_counter()
    try:
        cfg = cfg.validate()
        nominal = continuum_norms(cfg.force)
        beta = cfg.resolve_beta()
        force = build_force(cfg.force, cfg.grid)
        sim = sim_config(cfg, beta)
    except (ConfigError, SupportError, ValueError) as exc:
        return RunResult(EXIT_CONFIG, message=f"config invalid: {exc}")

    out = output_directory(cfg, output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return RunResult(EXIT_DISK, out, message=f"cannot create output directory: {exc}")

    try:
        records, final = integrate(sim, force)
        scheme_c = None
        if cfg.measure_scheme:
            fine_sim = sim_config(cfg, beta, 0.5)
            fine, _ = integrate(fine_sim, force)
            scheme_c = measure_scheme_constant(records, fine, sim, fine_sim)
    except BlowUpError as exc:
        return RunResult(EXIT_BLOWUP, out, message=f"blow-up guard: {exc}")
    except NonFiniteError as exc:
        return RunResult(EXIT_NONFINITE, out, message=f"non-finite diagnostic: {exc}")

    lattice = lattice_norms(force, cfg.force.ell0, cfg.alpha)
    residual = energy_inequality_residual(records, sim)
    # without a measured scheme constant the O(dt^2) drift of R(t) has no
    # tolerance, so the energy inequality entry is left out of the report
    margin = None
    if scheme_c is not None:
        margin = float(np.min(residual + residual_tolerance(records, sim.dt, SCHEME_SAFETY * scheme_c)))
    c = columns(records)
    u0_norm = math.sqrt(c["kinetic"][0])
    ceiling = np.exp(-beta * c["t"]) * u0_norm**2 + lattice.h_neg_alpha_half**2 / (cfg.nu * beta)
    avg = finalize_averages(records, cfg.force.ell0, cfg.nu, cfg.alpha, beta=beta, burn_in=sim.burn_in)
    ell0 = cfg.force.ell0

    inputs = {
        "F": lattice.F,
        "U": avg.U,
        "E": avg.E_alpha,
        "ell0": ell0,
        "nu": cfg.nu,
        "beta": beta,
        "alpha": cfg.alpha,
        "Gr": grashof(lattice, ell0, cfg.nu),
        "Re": avg.Re,
        "h_neg": lattice.h_neg_alpha_half,
        "damping_rule": cfg.damping.rule,
        "F_nominal": nominal.F,
        "Gr_nominal": grashof(nominal, ell0, cfg.nu),
        "gronwall_ratio_max": float(np.max(c["kinetic"] / ceiling)),
        "residual_margin": margin,
        "residual_scheme_constant": scheme_c,
        "converged": avg.converged,
        "stationarity_gap": avg.half_gap,
        "averages": avg.as_dict(),
        "force_nominal": nominal.as_dict(),
        "force_lattice": lattice.as_dict(),
        "conditions": _conditions(cfg, nominal),
        "grid": {"L": cfg.grid_L, "n": cfg.grid_n},
        "model": cfg.model,
        "model_note": MODEL_NOTE,
    }
    report = build_report(cfg.regimes, inputs, cfg.K)

    files = []
    try:
        ts = out / "timeseries.csv"
        write_timeseries(ts, records, residual)
        rp = out / "report.json"
        rp.write_text(report.to_json())
        meta = out / "run_meta.json"
        meta.write_text(json.dumps(_meta(cfg, sim, beta, len(records), started), indent=2))
        (out / "config.ini").write_text(to_ini(cfg))
        files += [ts, rp, meta, out / "config.ini"]
        if cfg.checkpoint:
            ck = out / "checkpoint.bin"
            save_checkpoint(ck, final)
            files.append(ck)
        if figures:
            from .plotting import render_run_figures

            files += render_run_figures(out, records, residual, ceiling, report)
    except OSError as exc:
        return RunResult(EXIT_DISK, out, report, f"write failed: {exc}", files)

    status = "converged" if avg.converged else "non-converged"
    return RunResult(EXIT_OK, out, report, f"ok ({status}, {len(records) - 1} steps)", files)


def _conditions(cfg: ExperimentConfig, nominal) -> list[dict]:
    try:
        return validate_conditions(cfg.force, nominal, cfg.nu, cfg.alpha).as_dict()
    except ValueError as exc:
        return [{"name": "unavailable", "note": str(exc)}]


def _meta(cfg: ExperimentConfig, sim: SimConfig, beta: float, n_records: int, started: float) -> dict:
    return {
        "config": to_ini(cfg),
        "resolved": {
            "beta": beta,
            "dt": sim.dt,
            "t_end": sim.t_end,
            "burn_in": sim.burn_in,
            "records": n_records,
        },
        "versions": {
            "dampedns": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": time.perf_counter() - started,
    }
