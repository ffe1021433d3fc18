"""
Time-independent, frequency-localized forces and the quantities derived from them.

A profile is radial in Fourier space: the pre-projection coefficient at k is
g(|k|) * e with a fixed unit direction e = (1, 0, 0). The built field is the
Leray projection of that, so it is divergence-free. Continuum norms are
computed for the radial profile itself; pass ``projected=True`` to get the
norms of the projected field instead (the angular factor is exact: 2/3 on
squared L^2-type norms, pi/4 on the gradient bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import NonIntegrableError, SupportError
from .spectral import (
    GridSpec,
    SpectralVectorField,
    leray_project,
    max_gradient_norm,
    sobolev_norm,
)

FORCE_DIRECTION = np.array([1.0, 0.0, 0.0])
QUAD_ABS_TOL = 1e-10

SHAPES = ("ball_indicator", "shell", "custom_radial")


@dataclass(frozen=True)
class ForceProfile:
    """Declarative radial force.

    ``c / ell0`` is the outer support radius for every shape. A shell also
    needs ``inner`` (absolute wavenumber). A custom profile is tabulated as
    ``table = (radii, values)`` and linearly interpolated; it is truncated
    at the support radius.
    """

    shape: str
    amplitude: float
    ell0: float = 1.0
    c: float = 1.0
    inner: float = 0.0
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    alpha: float = 2.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown force shape {self.shape!r}")
        if self.ell0 <= 0 or self.c <= 0:
            raise ValueError("ell0 and c must be positive")
        if self.shape == "shell" and not self.inner >= 0:
            raise ValueError("shell inner radius must be >= 0")
        if self.shape == "custom_radial" and self.table is None:
            raise ValueError("custom_radial needs a table")

    @property
    def radius(self) -> float:
        return self.c / self.ell0

    def radial(self, rho: np.ndarray) -> np.ndarray:
        """g(|xi|), already truncated to the support."""
        rho = np.asarray(rho, dtype=float)
        inside = (rho > 0) & (rho < self.radius)
        if self.shape == "ball_indicator":
            vals = np.full_like(rho, self.amplitude)
        elif self.shape == "shell":
            vals = np.full_like(rho, self.amplitude)
            inside &= rho >= self.inner
        else:
            radii, values = (np.asarray(a, dtype=float) for a in self.table)
            vals = self.amplitude * np.interp(rho, radii, values, right=0.0)
        return np.where(inside, vals, 0.0)


@dataclass(frozen=True)
class ForceNorms:
    """Norms of a force, all in the unitary convention.

    l2, h_neg1, h_neg_alpha_half, laplacian_l2: ||f||, ||f||_{H^-1},
    ||f||_{H^-alpha/2}, ||Lap f|| (units of force * length^{3/2} scaled by
    the relevant power of wavenumber). grad_linf: sup |grad f| or, for
    continuum profiles, its Fourier-integral upper bound. F = l2 / ell0^{3/2}.
    """

    l2: float
    h_neg1: float
    h_neg_alpha_half: float
    laplacian_l2: float
    grad_linf: float
    ell0: float
    alpha: float = 2.0
    F: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "F", self.l2 / self.ell0**1.5)

    def as_dict(self) -> dict:
        return {
            "l2": self.l2,
            "h_neg1": self.h_neg1,
            "h_neg_alpha_half": self.h_neg_alpha_half,
            "laplacian_l2": self.laplacian_l2,
            "grad_linf": self.grad_linf,
            "F": self.F,
            "ell0": self.ell0,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class DampingRule:
    rule: str
    value: float | None = None

    RULES = ("beta_from_force", "beta_from_viscosity", "explicit")

    def __post_init__(self):
        if self.rule not in self.RULES:
            raise ValueError(f"unknown damping rule {self.rule!r}")
        if self.rule == "explicit" and self.value is None:
            raise ValueError("explicit damping rule needs a value")


def build_force(profile: ForceProfile, grid: GridSpec) -> SpectralVectorField:
    """Sample the profile on the lattice and Leray-project it.

    Raises:
        SupportError: the support radius is beyond the dealiasing cutoff, or
            no nonzero lattice point falls inside the support.
    """
    if profile.shape == "shell" and profile.inner >= profile.radius:
        raise SupportError(
            f"shell inner radius {profile.inner} >= outer radius {profile.radius}: empty support"
        )
    if profile.radius > grid.dealias_cutoff:
        raise SupportError(
            f"force support radius {profile.radius:.4g} exceeds dealias cutoff "
            f"{grid.dealias_cutoff:.4g}; increase n or decrease c/ell0"
        )
    kmag = grid.kmag
    support = (kmag > 0) & (kmag < profile.radius)
    if profile.shape == "shell":
        support &= kmag >= profile.inner
    if not np.any(support):
        raise SupportError(
            f"no lattice wavenumber inside the force support (radius {profile.radius:.4g}, "
            f"lattice spacing {grid.dk:.4g}); enlarge the box"
        )
    g = np.where(support, profile.radial(kmag), 0.0)
    coeffs = FORCE_DIRECTION[:, None, None, None] * g[None].astype(complex)
    return leray_project(SpectralVectorField(grid, coeffs))


def _radial_moment(profile: ForceProfile, weight_power: float, square: bool = True) -> float:
    """integral over the support of |xi|^p g(|xi|)^q d^3 xi, q = 2 or 1."""
    a, r = profile.amplitude, profile.radius
    lo = profile.inner if profile.shape == "shell" else 0.0
    expo = weight_power + 3
    if profile.shape in ("ball_indicator", "shell"):
        if expo <= 0 and lo == 0:
            raise NonIntegrableError(f"weight |xi|^{weight_power} is not integrable at 0")
        amp = a**2 if square else abs(a)
        return amp * 4 * math.pi * (r**expo - lo**expo) / expo

    def integrand(rho):
        g = profile.radial(np.array(rho))
        g = float(g**2 if square else abs(g))
        return 4 * math.pi * rho ** (2 + weight_power) * g

    if expo <= 0 and abs(float(profile.radial(np.array(profile.radius * 1e-12)))) > 0:
        raise NonIntegrableError(f"weight |xi|^{weight_power} is not integrable at 0")
    radii = np.asarray(profile.table[0], dtype=float)
    breaks = [p for p in radii if 0 < p < r]
    val, _ = quad(integrand, 0.0, r, epsabs=QUAD_ABS_TOL, points=breaks or None, limit=200)
    return val


def continuum_norms(profile: ForceProfile, projected: bool = False) -> ForceNorms:
    """Exact continuum norms of the radial profile.

    For ball and shell shapes these are closed forms, e.g. for the ball
    ||f||^2 = A^2 (4/3) pi r^3 and ||f||^2_{H^-s} = A^2 4 pi r^{3-2s} / (3-2s).
    Custom profiles use adaptive quadrature.

    Raises:
        NonIntegrableError: alpha >= 3 with a profile that does not vanish at 0.
    """
    l2_sq = _radial_moment(profile, 0)
    hm1_sq = _radial_moment(profile, -2)
    hma_sq = _radial_moment(profile, -profile.alpha)
    lap_sq = _radial_moment(profile, 4)
    grad = _radial_moment(profile, 1, square=False) / (2 * math.pi) ** 1.5
    if projected:
        l2_sq, hm1_sq, hma_sq, lap_sq = (x * 2 / 3 for x in (l2_sq, hm1_sq, hma_sq, lap_sq))
        grad *= math.pi / 4
    return ForceNorms(
        l2=math.sqrt(l2_sq),
        h_neg1=math.sqrt(hm1_sq),
        h_neg_alpha_half=math.sqrt(hma_sq),
        laplacian_l2=math.sqrt(lap_sq),
        grad_linf=grad,
        ell0=profile.ell0,
        alpha=profile.alpha,
    )


def lattice_norms(f: SpectralVectorField, ell0: float, alpha: float = 2.0) -> ForceNorms:
    """Norms of a built force as it exists on the grid."""
    return ForceNorms(
        l2=sobolev_norm(f, 0),
        h_neg1=sobolev_norm(f, -1),
        h_neg_alpha_half=sobolev_norm(f, -alpha / 2),
        laplacian_l2=sobolev_norm(f, 2),
        grad_linf=max_gradient_norm(f),
        ell0=ell0,
        alpha=alpha,
    )


def grashof(norms: ForceNorms, ell0: float, nu: float) -> float:
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    return norms.l2 * ell0**1.5 / nu**2


def damping_beta(rule: DampingRule, norms: ForceNorms, nu: float, ell0: float) -> float:
    if rule.rule == "beta_from_force":
        beta = norms.F**1.5
    elif rule.rule == "beta_from_viscosity":
        beta = nu / ell0**2
    else:
        beta = rule.value
    if not beta > 0:
        raise ValueError(f"damping rule {rule.rule} gives non-positive beta = {beta}")
    return float(beta)


@dataclass(frozen=True)
class ConditionMargin:
    name: str
    ratio: float
    threshold: float
    strong: bool
    approx: bool
    note: str = ""


@dataclass
class ConditionReport:
    margins: list[ConditionMargin]

    def __getitem__(self, name: str) -> ConditionMargin:
        for m in self.margins:
            if m.name == name:
                return m
        raise KeyError(name)

    def as_dict(self) -> list[dict]:
        return [m.__dict__.copy() for m in self.margins]


APPROX_TOL = 0.05


def _margin(name: str, ratio: float, K: float, note: str = "") -> ConditionMargin:
    return ConditionMargin(
        name=name,
        ratio=ratio,
        threshold=K,
        strong=ratio >= K,
        approx=abs(ratio - 1.0) <= APPROX_TOL,
        note=note,
    )


def l2_condition_exponent(alpha: float) -> float:
    """Power of ell0 that ||f||_{L^2} must dominate, by alpha case."""
    if alpha == 2:
        return 2.5
    if alpha < 1:
        return 2 - alpha / 2
    return alpha + 0.5


def amplitude_window(alpha: float, ell0: float) -> tuple[float, float]:
    """[lower, upper] for sup|f_hat| in the constant-in-Fourier example force."""
    if alpha == 2:
        return ell0**4, ell0 ** (13 / 3)
    lower = ell0 ** (3.5 - alpha / 2) if alpha < 1 else ell0 ** (alpha + 2)
    return lower, ell0 ** (3 + 2 * alpha / 3)


def validate_conditions(
    profile: ForceProfile | None,
    norms: ForceNorms,
    nu: float,
    alpha: float = 2.0,
    K: float = 10.0,
) -> ConditionReport:
    """Margins of the force hypotheses.

    m1 = ||f|| / ell0^p with p from ``l2_condition_exponent``;
    m2 = ell0^{9/8} ||f||_{H^-alpha/2} / (sqrt(nu) ||f||^{7/4}).
    Each margin records whether ratio >= K and whether ratio is within 5% of 1.

    Raises:
        ValueError: alpha != 2 outside (3/7, 3).
    """
    if alpha != 2 and not (3 / 7 < alpha < 3):
        raise ValueError(f"fractional conditions need 3/7 < alpha < 3, got {alpha}")
    ell0 = norms.ell0
    p = l2_condition_exponent(alpha)
    h = norms.h_neg1 if alpha == 2 else norms.h_neg_alpha_half
    m1 = norms.l2 / ell0**p
    m2 = ell0 ** (9 / 8) * h / (math.sqrt(nu) * norms.l2**1.75)
    margins = [
        _margin("m1_l2_vs_length", m1, K, f"||f||_L2 / ell0^{p:g}"),
        _margin("m2_negative_sobolev", m2, K, "ell0^(9/8) ||f||_H^-a/2 / (sqrt(nu) ||f||^(7/4))"),
    ]
    in_regime = 0 < nu < 2
    margins.append(
        ConditionMargin("viscosity_regime", nu, 2.0, in_regime, False, "the two-sided laws assume 0 < nu < 2")
    )
    if profile is not None and profile.shape == "ball_indicator":
        lo, hi = amplitude_window(alpha, ell0)
        a = profile.amplitude
        where = "below" if a < lo else ("above" if a > hi else "inside")
        margins.append(
            ConditionMargin(
                "amplitude_window", a / lo, hi / lo, lo <= a <= hi, False,
                f"sup|f_hat| = {a:.6g} is {where} [{lo:.6g}, {hi:.6g}]",
            )
        )
    return ConditionReport(margins)
