"""Energy budget records, the energy-inequality residual and long-time averages."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import InsufficientHorizonError, NonFiniteError
from .forcing import ForceNorms
from .solver import SimConfig, SolverState
from .spectral import SpectralVectorField, inner_product, sobolev_norm_sq

CSV_COLUMNS = ("t", "kinetic", "dissipation", "hyper_dissipation", "injection", "damping_drain", "residual")
STATIONARITY_TOL = 0.02


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    kinetic: float
    dissipation: float
    hyper_dissipation: float
    injection: float
    damping_drain: float


def record(state: SolverState, config: SimConfig, force: SpectralVectorField) -> EnergyRecord:
    """Energy-budget scalars of one state.

    kinetic = ||u||^2, dissipation = ||u||^2_{H^{alpha/2}}, hyper_dissipation =
    ||u||^2_{H^2} (0 unless epsilon > 0), injection = <f, u>, damping_drain =
    beta ||u||^2.
    """
    u = state.u
    kinetic = sobolev_norm_sq(u, 0)
    rec = EnergyRecord(
        t=state.t,
        kinetic=kinetic,
        dissipation=sobolev_norm_sq(u, config.alpha / 2),
        hyper_dissipation=sobolev_norm_sq(u, 2) if config.epsilon > 0 else 0.0,
        injection=inner_product(force, u),
        damping_drain=config.beta * kinetic,
    )
    bad = [f.name for f in fields(rec) if not math.isfinite(getattr(rec, f.name))]
    if bad:
        raise NonFiniteError(f"non-finite {', '.join(bad)} at t={state.t:.6g} (step {state.step_index})")
    return rec


def record_trajectory(states: Iterable[SolverState], config: SimConfig, force: SpectralVectorField) -> list[EnergyRecord]:
    return [record(s, config, force) for s in states]


def columns(records: Sequence[EnergyRecord]) -> dict[str, np.ndarray]:
    return {f.name: np.array([getattr(r, f.name) for r in records]) for f in fields(EnergyRecord)}


def energy_inequality_residual(records: Sequence[EnergyRecord], config: SimConfig) -> np.ndarray:
    """R(t) = ||u0||^2 - ||u(t)||^2 - 2 nu int D - 2 eps int H + 2 int <f,u> - 2 beta int ||u||^2.

    Integrals are cumulative trapezoids over the recorded times. The energy
    inequality holds when R >= -tol; for the linear (Stokes) model R = 0 up to
    quadrature error.
    """
    if len(records) < 2:
        raise ValueError("need at least two records")
    c = columns(records)
    t = c["t"]

    def integral(name):
        return cumulative_trapezoid(c[name], t, initial=0.0)

    return (
        c["kinetic"][0]
        - c["kinetic"]
        - 2 * config.nu * integral("dissipation")
        - 2 * config.epsilon * integral("hyper_dissipation")
        + 2 * integral("injection")
        - 2 * integral("damping_drain")
    )


def residual_tolerance(records: Sequence[EnergyRecord], dt: float, scheme_constant: float) -> np.ndarray:
    """tol_E(t) = 1e-6 ||u0||^2 + C dt^2 t."""
    t = np.array([r.t for r in records])
    return 1e-6 * records[0].kinetic + scheme_constant * dt**2 * t


def measure_scheme_constant(
    coarse: Sequence[EnergyRecord],
    fine: Sequence[EnergyRecord],
    config_coarse: SimConfig,
    config_fine: SimConfig,
) -> float:
    """Richardson estimate of C in |R(t)| ~ C dt^2 t from runs at dt and dt/2."""
    rc = energy_inequality_residual(coarse, config_coarse)
    rf = energy_inequality_residual(fine, config_fine)
    tc = np.array([r.t for r in coarse])
    tf = np.array([r.t for r in fine])
    err = np.abs(rc - np.interp(tc, tf, rf)) * 4 / 3
    dt = config_coarse.dt
    nz = tc > 0
    if not np.any(nz):
        return 0.0
    return float(np.max(err[nz] / (dt**2 * tc[nz])))


@dataclass(frozen=True)
class RunningAverages:
    """Finite-horizon stand-ins for the limsup quantities.

    U = (mean ||u||^2 / ell0^3)^{1/2}, E_alpha = nu mean ||u||^2_{H^{alpha/2}} / ell0^3,
    Re = U ell0 / nu. ``converged`` is the stationarity flag.
    """

    horizon: float
    burn_in: float
    mean_kinetic: float
    mean_dissipation: float
    mean_injection: float
    U: float
    E_alpha: float
    Re: float
    converged: bool
    half_gap: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _window_mean(t: np.ndarray, y: np.ndarray, a: float, b: float) -> float:
    inside = (t > a) & (t < b)
    tt = np.concatenate(([a], t[inside], [b]))
    yy = np.concatenate(([np.interp(a, t, y)], y[inside], [np.interp(b, t, y)]))
    return float(trapezoid(yy, tt) / (b - a))


def finalize_averages(
    records: Sequence[EnergyRecord],
    ell0: float,
    nu: float,
    alpha: float = 2.0,
    *,
    beta: float,
    burn_in: float,
) -> RunningAverages:
    """Trapezoidal averages over [burn_in, T] plus a halves stationarity check.

    Raises:
        InsufficientHorizonError: T - burn_in < 10 / beta.
    """
    c = columns(records)
    t = c["t"]
    T = float(t[-1])
    if T - burn_in < 10 / beta * (1 - 1e-12):
        raise InsufficientHorizonError(
            f"averaging window {T - burn_in:.4g} is shorter than 10/beta = {10 / beta:.4g}"
        )
    kin = _window_mean(t, c["kinetic"], burn_in, T)
    dis = _window_mean(t, c["dissipation"], burn_in, T)
    inj = _window_mean(t, c["injection"], burn_in, T)
    mid = 0.5 * (burn_in + T)
    gaps = []
    for name in ("kinetic", "dissipation"):
        first = _window_mean(t, c[name], burn_in, mid)
        second = _window_mean(t, c[name], mid, T)
        scale = max(abs(first), abs(second))
        gaps.append(0.0 if scale == 0 else abs(first - second) / scale)
    half_gap = max(gaps)
    U = math.sqrt(kin / ell0**3)
    return RunningAverages(
        horizon=T,
        burn_in=burn_in,
        mean_kinetic=kin,
        mean_dissipation=dis,
        mean_injection=inj,
        U=U,
        E_alpha=nu * dis / ell0**3,
        Re=U * ell0 / nu,
        converged=half_gap <= STATIONARITY_TOL,
        half_gap=half_gap,
    )


def dissipation_ceiling(norms: ForceNorms, nu: float, ell0: float) -> float:
    """Upper bound ||f||^2_{H^-1} / (nu ell0^3) on the dissipation rate."""
    if not (nu > 0 and ell0 > 0):
        raise ValueError("nu and ell0 must be positive")
    return norms.h_neg1**2 / (nu * ell0**3)


def velocity_ceiling_sq(norms: ForceNorms, nu: float, beta: float, ell0: float) -> float:
    """Upper bound ||f||^2_{H^-1} / (nu beta ell0^3) on U^2."""
    return norms.h_neg1**2 / (nu * beta * ell0**3)


def write_timeseries(path, records: Sequence[EnergyRecord], residual: Sequence[float]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r, res in zip(records, residual):
            w.writerow([repr(float(x)) for x in (
                r.t, r.kinetic, r.dissipation, r.hyper_dissipation, r.injection, r.damping_drain, res,
            )])


def read_timeseries(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected timeseries header {header}")
    data = np.array(body, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}
