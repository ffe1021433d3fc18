"""
Time integration of the damped (fractional) Navier-Stokes and Stokes equations

    du/dt = -nu (-Lap)^{alpha/2} u - eps Lap^2 u - beta u - P[(v.grad) u] + f,
    v = mollified u,

on the periodic grid. The linear part is integrated exactly per mode
(integrating factor); transport enters through an exponential midpoint
stage. With transport disabled the scheme is exact, which is what
``stokes_exact`` checks.
"""

from __future__ import annotations

import io
import logging
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .errors import BlowUpError, ConfigError, GridMismatchError, InvariantError
from .spectral import (
    GridSpec,
    SpectralVectorField,
    _expand_half,
    _half_to_physical,
    _physical_to_half,
    _project_with,
    fractional_symbol,
    inverse_transform,
    random_lowpass,
    sobolev_norm,
    sobolev_norm_sq,
)

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e3
INVARIANT_TOL = 1e-10
CFL_REFRESH = 10


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "zero"
    seed: int = 0
    energy: float = 0.0
    cutoff: float = 0.0
    field: SpectralVectorField | None = None

    def build(self, grid: GridSpec) -> SpectralVectorField:
        if self.kind == "zero":
            return SpectralVectorField.zeros(grid)
        if self.kind == "random_lowpass":
            return random_lowpass(grid, self.seed, self.energy, self.cutoff)
        if self.kind == "explicit":
            if self.field is None or self.field.grid != grid:
                raise GridMismatchError("explicit initial field missing or on a different grid")
            return self.field
        raise ConfigError(f"unknown initial condition {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    """Model and integration parameters.

    ``beta`` is the resolved damping rate. ``cfl`` switches on the adaptive
    advective step dt <= cfl * dx / max|u| (``dt`` then acts as the cap).
    """

    nu: float
    beta: float
    grid: GridSpec
    dt: float
    t_end: float
    alpha: float = 2.0
    delta: float = 0.0
    epsilon: float = 0.0
    burn_in: float = 0.0
    transport: bool = True
    cfl: float | None = None
    initial_condition: InitialCondition = field(default_factory=InitialCondition)
    check_every: int = 100

    def __post_init__(self):
        problems = []
        if not self.dt > 0:
            problems.append(f"dt must be positive (got {self.dt})")
        if not self.nu > 0:
            problems.append(f"nu must be positive (got {self.nu})")
        if not self.beta > 0:
            problems.append(f"beta must be positive (got {self.beta})")
        if not 0 < self.alpha < 4:
            problems.append(f"alpha must lie in (0, 4) (got {self.alpha})")
        if self.delta < 0 or self.epsilon < 0:
            problems.append("delta and epsilon must be >= 0")
        if not self.burn_in < self.t_end:
            problems.append(f"burn_in ({self.burn_in}) must be < t_end ({self.t_end})")
        if self.cfl is not None and not self.cfl > 0:
            problems.append("cfl must be positive")
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass(frozen=True)
class SolverState:
    t: float
    u: SpectralVectorField
    step_index: int = 0


def linear_symbol(grid: GridSpec, nu: float, beta: float, alpha: float = 2.0, epsilon: float = 0.0) -> np.ndarray:
    """lambda(k) = nu |k|^alpha + beta + epsilon |k|^4."""
    lam = nu * fractional_symbol(grid, alpha) + beta
    if epsilon:
        lam = lam + epsilon * grid.k2**2
    return lam


def _phi(lam: np.ndarray, h: float) -> np.ndarray:
    # (1 - e^{-lam h}) / lam, accurate for small lam h
    return -np.expm1(-lam * h) / lam


class IntegratingFactor:
    """Per-mode propagators e^{-lam h} and (1 - e^{-lam h}) / lam, cached by h."""

    def __init__(self, lam: np.ndarray):
        self.lam = lam
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def factors(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        got = self._cache.get(h)
        if got is None:
            if len(self._cache) > 8:
                self._cache.clear()
            got = (np.exp(-self.lam * h), _phi(self.lam, h))
            self._cache[h] = got
        return got

    @classmethod
    def for_config(cls, config: SimConfig) -> IntegratingFactor:
        return cls(linear_symbol(config.grid, config.nu, config.beta, config.alpha, config.epsilon))


def transport_term(u: SpectralVectorField, delta: float = 0.0) -> SpectralVectorField:
    """P of the dealiased skew-symmetric transport 1/2 [(v.grad)u + div(v (x) u)].

    ``v`` is ``u`` filtered by exp(-delta^2 |k|^2); delta = 0 gives the plain
    Navier-Stokes nonlinearity.
    """
    return u.with_coeffs(_transport_coeffs(u.coeffs, u.grid, delta))


_SYMMETRIC_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _transport_coeffs(coeffs: np.ndarray, grid: GridSpec, delta: float) -> np.ndarray:
    # Work on the half spectrum with real FFTs; the fields are real, so the
    # negative last-axis frequencies are recovered by conjugate reflection.
    h = grid.n // 2 + 1
    mask = grid.dealias_mask[..., :h]
    kd = grid.k_deriv[..., :h]
    c = coeffs[..., :h] * mask
    u_x = _half_to_physical(c, grid)
    if delta > 0:
        v_x = _half_to_physical(c * np.exp(-(delta**2) * grid.k2[..., :h]), grid)
    else:
        v_x = u_x
    grad = _half_to_physical(1j * c[:, None] * kd[None, :], grid)
    adv = np.einsum("j...,ij...->i...", v_x, grad)
    if delta > 0:
        flux_hat = _physical_to_half(u_x[:, None] * v_x[None, :], grid)
    else:
        # u (x) u is symmetric: transform the six distinct products only
        pairs = _physical_to_half(np.stack([u_x[i] * u_x[j] for i, j in _SYMMETRIC_PAIRS]), grid)
        flux_hat = np.empty((3, 3) + pairs.shape[1:], dtype=complex)
        for p, (i, j) in enumerate(_SYMMETRIC_PAIRS):
            flux_hat[i, j] = flux_hat[j, i] = pairs[p]
    div_hat = 1j * np.einsum("j...,ij...->i...", kd, flux_hat)
    out = 0.5 * (_physical_to_half(adv, grid) + div_hat) * mask
    out = _project_with(out, grid.k[..., :h], grid.k2[..., :h])
    return _expand_half(out, grid)


def step_imex(
    state: SolverState,
    config: SimConfig,
    force: SpectralVectorField,
    dt: float | None = None,
    factor: IntegratingFactor | None = None,
) -> SolverState:
    """Advance one step of size ``dt`` (default ``config.dt``)."""
    h = config.dt if dt is None else dt
    factor = factor or IntegratingFactor.for_config(config)
    E, phi = factor.factors(h)
    u, f = state.u.coeffs, force.coeffs
    if not config.transport:
        new = E * u + phi * f
    else:
        Eh, phih = factor.factors(h / 2)
        n0 = _transport_coeffs(u, config.grid, config.delta)
        mid = Eh * u + phih * (f - n0)
        n1 = _transport_coeffs(mid, config.grid, config.delta)
        new = E * u + phi * (f - n1)
    new[:, 0, 0, 0] = 0.0
    return SolverState(state.t + h, state.u.with_coeffs(new), state.step_index + 1)


def stokes_exact(
    u0: SpectralVectorField,
    f: SpectralVectorField,
    nu: float,
    beta: float,
    t: float,
    alpha: float = 2.0,
    epsilon: float = 0.0,
) -> SpectralVectorField:
    """Closed-form damped Stokes solution at time t, mode by mode."""
    if not (nu > 0 and beta > 0):
        raise ValueError("nu and beta must be positive")
    lam = linear_symbol(u0.grid, nu, beta, alpha, epsilon)
    coeffs = np.exp(-lam * t) * u0.coeffs + _phi(lam, t) * f.coeffs
    coeffs[:, 0, 0, 0] = 0.0
    return u0.with_coeffs(coeffs)


def stokes_steady_state(
    f: SpectralVectorField, nu: float, beta: float, alpha: float = 2.0, epsilon: float = 0.0
) -> SpectralVectorField:
    lam = linear_symbol(f.grid, nu, beta, alpha, epsilon)
    coeffs = f.coeffs / lam
    coeffs[:, 0, 0, 0] = 0.0
    return f.with_coeffs(coeffs)


def gronwall_ceiling(u0_norm: float, f_hneg1: float, nu: float, beta: float, t: float) -> float:
    """Upper bound on ||u(t)||^2: e^{-beta t} ||u0||^2 + ||f||_{H^-1}^2 / (nu beta)."""
    if not (nu > 0 and beta > 0):
        raise ValueError("nu and beta must be positive")
    return math.exp(-beta * t) * u0_norm**2 + f_hneg1**2 / (nu * beta)


def energy_ceiling_norm(f: SpectralVectorField, config: SimConfig) -> float:
    """||f||_{H^-alpha/2} / sqrt(nu beta), the a-priori bound on ||u|| at large t."""
    return sobolev_norm(f, -config.alpha / 2) / math.sqrt(config.nu * config.beta)


def check_invariants(state: SolverState, tol: float = INVARIANT_TOL):
    div = state.u.divergence_defect()
    herm = state.u.hermitian_defect()
    if div > tol or herm > tol:
        raise InvariantError(
            f"step {state.step_index}, t={state.t:.6g}: divergence defect {div:.3g}, "
            f"hermitian defect {herm:.3g}"
        )


def advective_dt(u: SpectralVectorField, cfl: float) -> float:
    umax = float(np.max(np.sqrt(np.sum(inverse_transform(u) ** 2, axis=0))))
    return math.inf if umax == 0 else cfl * u.grid.dx / umax


def trajectory(
    config: SimConfig,
    force: SpectralVectorField,
    u0: SpectralVectorField | None = None,
) -> Iterator[SolverState]:
    """Yield the state at t = 0 and after every step up to ``config.t_end``.

    Raises:
        BlowUpError: ||u|| exceeds 1e3 times max(a-priori ceiling, ||u0||).
        InvariantError: divergence or Hermitian symmetry lost (checked every
            ``config.check_every`` steps).
    """
    grid = config.grid
    if force.grid != grid:
        raise GridMismatchError("force and configuration use different grids")
    u = config.initial_condition.build(grid) if u0 is None else u0
    factor = IntegratingFactor.for_config(config)
    limit = BLOWUP_FACTOR * max(energy_ceiling_norm(force, config), sobolev_norm(u, 0))
    state = SolverState(0.0, u, 0)
    yield state
    dt = config.dt
    eps_t = 1e-12 * config.t_end
    while state.t < config.t_end - eps_t:
        if config.cfl is not None and state.step_index % CFL_REFRESH == 0:
            dt = min(config.dt, advective_dt(state.u, config.cfl))
        h = min(dt, config.t_end - state.t)
        state = step_imex(state, config, force, h, factor)
        norm = math.sqrt(sobolev_norm_sq(state.u, 0))
        if not norm <= limit:
            raise BlowUpError(
                f"||u||_L2 = {norm:.4g} exceeds guard {limit:.4g} at t={state.t:.6g} "
                f"(step {state.step_index})"
            )
        if config.check_every and state.step_index % config.check_every == 0:
            check_invariants(state)
        yield state


def simulate(config: SimConfig, force: SpectralVectorField, u0=None) -> SolverState:
    """Run to ``t_end`` and return the final state."""
    state = None
    for state in trajectory(config, force, u0):
        pass
    return state


def with_params(config: SimConfig, **changes) -> SimConfig:
    return replace(config, **changes)


# Checkpoint: 16-byte prefix (8-byte magic, uint32 version, 4 reserved),
# header (L f64, n u64, t f64, step u64), then complex128 coefficients in
# lexicographic lattice order m1, m2, m3 in [-n/2, n/2), 3 components each.
CHECKPOINT_MAGIC = b"DNSLAWCK"
CHECKPOINT_VERSION = 1
_PREFIX = struct.Struct("<8sI4x")
_HEADER = struct.Struct("<dQdQ")


def checkpoint_bytes(state: SolverState) -> bytes:
    grid = state.u.grid
    buf = io.BytesIO()
    buf.write(_PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION))
    buf.write(_HEADER.pack(grid.box_length, grid.n, state.t, state.step_index))
    lex = np.fft.fftshift(state.u.coeffs, axes=(1, 2, 3))
    buf.write(np.ascontiguousarray(np.moveaxis(lex, 0, -1)).astype("<c16").tobytes())
    return buf.getvalue()


def state_from_bytes(data: bytes) -> SolverState:
    magic, version = _PREFIX.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    L, n, t, step = _HEADER.unpack_from(data, _PREFIX.size)
    grid = GridSpec(L, int(n))
    offset = _PREFIX.size + _HEADER.size
    expected = n**3 * 3 * 16
    if len(data) - offset != expected:
        raise ValueError(f"checkpoint payload has {len(data) - offset} bytes, expected {expected}")
    lex = np.frombuffer(data, dtype="<c16", offset=offset).reshape(n, n, n, 3)
    coeffs = np.fft.ifftshift(np.moveaxis(lex, -1, 0), axes=(1, 2, 3)).astype(complex)
    return SolverState(t, SpectralVectorField(grid, coeffs), int(step))


def save_checkpoint(path, state: SolverState):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(state))


def load_checkpoint(path) -> SolverState:
    with open(path, "rb") as fh:
        return state_from_bytes(fh.read())
