"""
Closed-form inequality checks on measured and exact run quantities.

Every check returns ``BoundEntry`` rows of the form lhs <= rhs with
margin = rhs - lhs, so a non-negative margin always means "holds". Reports
carry the inputs they were computed from; ``audit`` rebuilds the entries
from those inputs and compares.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

REGIMES = ("classical", "fractional", "stokes", "appendix_c", "small_grashof")
DEFAULT_K = 2.0
EDGE_RTOL = 1e-12

# small-Grashof coefficients rounded for Gr ~ 2
ROUNDED_LOWER_COEFF = 3 / 4
ROUNDED_UPPER_COEFF = 1601 / 160


@dataclass(frozen=True)
class BoundEntry:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    margin: float
    note: str = ""


def _le(name: str, lhs: float, rhs: float, note: str = "", strict: bool = False) -> BoundEntry:
    lhs, rhs = float(lhs), float(rhs)
    ok = lhs < rhs if strict else lhs <= rhs
    if math.isclose(lhs, rhs, rel_tol=EDGE_RTOL, abs_tol=0.0):
        note = (note + "; " if note else "") + "equality edge"
    return BoundEntry(name, lhs, rhs, bool(ok), rhs - lhs, note)


@dataclass
class BoundReport:
    regime: str
    entries: list[BoundEntry] = field(default_factory=list)
    inputs: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> BoundEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def all_satisfied(self) -> bool:
        return all(e.satisfied for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "entries": [asdict(e) for e in self.entries],
            "inputs": self.inputs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict) -> BoundReport:
        entries = [BoundEntry(**e) for e in data["entries"]]
        return cls(data["regime"], entries, dict(data["inputs"]))


# --- individual checks -------------------------------------------------------


def check_force_velocity_chain(F: float, U: float, ell0: float, alpha: float = 2.0, K: float = DEFAULT_K) -> list[BoundEntry]:
    """1 << F <= U <= F^{3/2} ell0^{alpha - 1}; the first entry reports F against K."""
    strong = "meets" if F >= K else "below"
    return [
        _le("chain.F_gt_1", 1.0, F, f"F/1 = {F:.6g} {strong} K = {K:g}", strict=True),
        _le("chain.F_le_U", F, U),
        _le("chain.U_le_F32", U, F**1.5 * ell0 ** (alpha - 1)),
    ]


def main_law_coefficients(ell0: float, nu: float, Gr: float) -> tuple[float, float]:
    """Gr-dependent (lower, upper) coefficients multiplying U^3 / ell0."""
    return 1 - ell0**4 / (nu**2 * Gr), 10 + ell0**8 / (10 * nu**4 * Gr**2)


def fractional_law_coefficients(ell0: float, nu: float, Gr: float, alpha: float) -> tuple[float, float]:
    return (
        1 - ell0 ** (alpha + 2) / (nu**2 * Gr),
        10 + ell0 ** (2 * alpha + 4) / (10 * nu**4 * Gr**2),
    )


def check_main_law(U: float, E: float, ell0: float, nu: float, Gr: float) -> list[BoundEntry]:
    scale = U**3 / ell0
    lo, hi = main_law_coefficients(ell0, nu, Gr)
    return [
        _le("main.lower_half", 0.5 * scale, E),
        _le("main.upper_101_10", E, 101 / 10 * scale),
        _le("main.lower_gr", lo * scale, E, f"coefficient {lo:.10g}"),
        _le("main.upper_gr", E, hi * scale, f"coefficient {hi:.10g}"),
    ]


def check_fractional_law(U: float, E_alpha: float, ell0: float, nu: float, Gr: float, alpha: float) -> list[BoundEntry]:
    """Two-sided law for E_alpha plus the hypothesis ell0^{alpha+2} / (nu^2 Gr) <= 1/2.

    Raises:
        ValueError: alpha outside (3/7, 3).
    """
    if not 3 / 7 < alpha < 3:
        raise ValueError(f"fractional law certified only for 3/7 < alpha < 3, got {alpha}")
    scale = U**3 / ell0 ** (alpha - 1)
    lo, hi = fractional_law_coefficients(ell0, nu, Gr, alpha)
    return [
        _le("fractional.lower_half", 0.5 * scale, E_alpha),
        _le("fractional.upper_401_40", E_alpha, 401 / 40 * scale),
        _le("fractional.lower_gr", lo * scale, E_alpha, f"coefficient {lo:.10g}"),
        _le("fractional.upper_gr", E_alpha, hi * scale, f"coefficient {hi:.10g}"),
        _le("fractional.hypothesis", ell0 ** (alpha + 2) / (nu**2 * Gr), 0.5),
    ]


def appendix_c_constant(F: float, U: float, ell0: float, Gr: float) -> float:
    """Smallest float c with F <= c (1/Gr + 1) U^2 / ell0, evaluated as the check does."""
    c = F / ((1 / Gr + 1) * U**2 / ell0)
    # the quotient can land one ulp short once the product is re-formed
    while c * (1 / Gr + 1) * U**2 / ell0 < F:
        c = math.nextafter(c, math.inf)
    return c


def calibrate_appendix_c_constant(runs) -> float:
    """Max of ``appendix_c_constant`` over dicts with keys F, U, ell0, Gr."""
    return max(appendix_c_constant(r["F"], r["U"], r["ell0"], r["Gr"]) for r in runs)


def check_appendix_c(
    U: float,
    E: float,
    F: float,
    ell0: float,
    nu: float,
    Gr: float,
    Re: float,
    c_const: float | None = None,
    damping_rule: str = "beta_from_viscosity",
) -> list[BoundEntry]:
    """Entries for the beta = nu / ell0^2 damping choice.

    With ``c_const`` None the run's own minimal constant is used and reported.

    Raises:
        ValueError: the run did not use beta = nu / ell0^2.
    """
    if damping_rule != "beta_from_viscosity":
        raise ValueError(f"viscous-damping bounds need damping rule beta_from_viscosity, got {damping_rule}")
    note = "c given"
    if c_const is None:
        c_const = appendix_c_constant(F, U, ell0, Gr)
        note = "c calibrated on this run"
    coeff = c_const * (1 / Gr + 1)
    note = f"{note}: c = {c_const:.10g}"
    return [
        _le("appendix_c.hypothesis_2Gr_le_Re", 2 * Gr, Re),
        _le("appendix_c.dissipation_le_FU", E, F * U),
        _le("appendix_c.force_le_cU2", F, coeff * U**2 / ell0, note),
        _le("appendix_c.dissipation_le_cU3", E, coeff * U**3 / ell0, note),
    ]


def check_small_grashof(ell0: float, nu: float, Gr: float, U: float | None = None, E: float | None = None) -> list[BoundEntry]:
    """Exact Gr-dependent coefficients against the rounded 3/4 and 1601/160.

    Both rounded values must be weaker than the exact ones for the rounded
    law to follow; with measured U and E the law itself is evaluated too.
    """
    lo, hi = main_law_coefficients(ell0, nu, Gr)
    out = [
        _le("small_grashof.lower_coefficient", ROUNDED_LOWER_COEFF, lo, f"exact {lo:.10g} vs rounded 3/4"),
        _le("small_grashof.upper_coefficient", hi, ROUNDED_UPPER_COEFF, f"exact {hi:.10g} vs rounded 1601/160"),
    ]
    if U is not None and E is not None:
        scale = U**3 / ell0
        out += [
            _le("small_grashof.lower_law", ROUNDED_LOWER_COEFF * scale, E),
            _le("small_grashof.upper_law", E, ROUNDED_UPPER_COEFF * scale),
        ]
    return out


def check_ceilings(
    U: float,
    E: float,
    h_neg: float,
    nu: float,
    beta: float,
    ell0: float,
    gronwall_ratio_max: float,
    residual_margin: float | None = None,
) -> list[BoundEntry]:
    """A-priori ceilings that hold for every run, whatever the regime.

    ``h_neg`` is ||f||_{H^-alpha/2} of the simulated force;
    ``gronwall_ratio_max`` is max_t ||u(t)||^2 / ceiling(t); ``residual_margin``
    is min_t (R(t) + tol_E(t)).
    """
    out = [
        _le("ceiling.gronwall", gronwall_ratio_max, 1.0, "max_t ||u||^2 / ceiling(t)"),
        _le("ceiling.velocity", U**2, h_neg**2 / (nu * beta * ell0**3)),
        _le("ceiling.dissipation", E, h_neg**2 / (nu * ell0**3)),
    ]
    if residual_margin is not None:
        out.append(_le("energy.inequality", 0.0, residual_margin, "min_t R(t) + tol_E(t)"))
    return out


# --- report assembly and audit -----------------------------------------------


def build_report(regimes, inputs: dict, K: float = DEFAULT_K) -> BoundReport:
    """Evaluate every requested regime from a flat dict of inputs.

    Keys used: F, U, E, ell0, nu, Gr, Re, alpha, damping_rule, and optionally
    c_const and Gr_nominal / ell0 / nu for the small-Grashof coefficients.
    """
    regimes = [regimes] if isinstance(regimes, str) else list(regimes)
    unknown = set(regimes) - set(REGIMES)
    if unknown:
        raise ValueError(f"unknown regimes {sorted(unknown)}")
    x = inputs
    alpha = x.get("alpha", 2.0)
    entries: list[BoundEntry] = []
    for regime in regimes:
        if regime in ("classical", "stokes"):
            entries += check_force_velocity_chain(x["F"], x["U"], x["ell0"], 2.0, K)
            entries += check_main_law(x["U"], x["E"], x["ell0"], x["nu"], x["Gr"])
        elif regime == "fractional":
            entries += check_force_velocity_chain(x["F"], x["U"], x["ell0"], alpha, K)
            entries += check_fractional_law(x["U"], x["E"], x["ell0"], x["nu"], x["Gr"], alpha)
        elif regime == "appendix_c":
            entries += check_appendix_c(
                x["U"], x["E"], x["F"], x["ell0"], x["nu"], x["Gr"], x["Re"],
                x.get("c_const"), x.get("damping_rule", "beta_from_viscosity"),
            )
        elif regime == "small_grashof":
            entries += check_small_grashof(
                x["ell0"], x["nu"], x.get("Gr_nominal", x["Gr"]), x.get("U"), x.get("E"),
            )
    if "gronwall_ratio_max" in x:
        entries += check_ceilings(
            x["U"], x["E"], x["h_neg"], x["nu"], x["beta"], x["ell0"],
            x["gronwall_ratio_max"], x.get("residual_margin"),
        )
    stored = dict(inputs)
    stored["regimes"] = regimes
    stored["K"] = K
    label = regimes[0] if regimes else "classical"
    if label == "fractional":
        label = f"fractional({alpha:g})"
    return BoundReport(label, entries, stored)


def audit(report: BoundReport, rtol: float = 0.0) -> list[str]:
    """Recompute a report from its inputs; return a list of discrepancies (empty = ok)."""
    fresh = build_report(report.inputs["regimes"], report.inputs, report.inputs.get("K", DEFAULT_K))
    problems = []
    if [e.name for e in fresh.entries] != [e.name for e in report.entries]:
        return [f"entry names differ: stored {[e.name for e in report.entries]}"]
    for old, new in zip(report.entries, fresh.entries):
        for attr in ("lhs", "rhs", "margin"):
            a, b = getattr(old, attr), getattr(new, attr)
            if not (a == b or math.isclose(a, b, rel_tol=rtol, abs_tol=0.0)):
                problems.append(f"{old.name}.{attr}: stored {a!r}, recomputed {b!r}")
        if old.satisfied != new.satisfied:
            problems.append(f"{old.name}.satisfied: stored {old.satisfied}, recomputed {new.satisfied}")
        if (old.satisfied and old.margin < 0) or (not old.satisfied and old.margin > 0):
            problems.append(f"{old.name}: margin sign inconsistent with flag")
    return problems


# --- algebraic sweep ---------------------------------------------------------


def _holds(lhs, rhs):
    return lhs <= rhs * (1 + EDGE_RTOL)


def implications_at(ell0: float, nu: float, f_l2: float, alpha: float, U: float) -> dict[str, tuple[bool, bool]]:
    """(hypothesis, conclusion) for each implication at one parameter point."""
    Gr = f_l2 * ell0**1.5 / nu**2
    F = f_l2 / ell0**1.5
    Re = U * ell0 / nu
    out = {
        "i": (f_l2 >= 2 * ell0**2.5, _holds(ell0**4 / (nu**2 * Gr), 0.5)),
        "ii": (f_l2 >= ell0**2.5, _holds(ell0**8 / (nu**4 * Gr**2), 1.0)),
        "iii": (F <= U, _holds(Gr, ell0**2 / nu * Re)),
    }
    if 3 / 7 < alpha < 3 and ell0 >= 1:
        p = 2 - alpha / 2 if alpha < 1 else alpha + 0.5
        hyp = f_l2 >= 2 * ell0**p
        concl = _holds(ell0 ** (alpha + 2) / (nu**2 * Gr), 0.5) and _holds(
            ell0 ** (2 * alpha + 4) / (nu**4 * Gr**2), 0.25
        )
        out["iv_lower"] = (hyp, concl)
        out["iv_upper"] = (
            f_l2 >= ell0**p,
            _holds(1.0, ell0 ** (2 * (alpha - 1)) * F**4),
        )
    return out


@dataclass
class SweepResult:
    points: int
    hypotheses_true: dict[str, int]
    counterexamples: list[dict]


def default_sweep_axes(size: int = 10) -> dict[str, np.ndarray]:
    return {
        "ell0": np.logspace(-1, 2, size),
        "nu": np.logspace(-3, 0, size),
        "f_l2": np.logspace(-1, 12, size),
        "alpha": np.linspace(0.45, 2.95, size),
        "u_factor": np.array([0.5, 1.0, 2.0]),
    }


def algebraic_regime_sweep(axes: dict | None = None, boundary: bool = True) -> SweepResult:
    """Brute-force every implication over the Cartesian grid of ``axes``.

    ``u_factor`` sets U = u_factor * F. With ``boundary`` the exact threshold
    norms 2 ell0^{5/2}, ell0^{5/2} and the fractional thresholds are added for
    every (ell0, alpha).
    """
    axes = axes or default_sweep_axes()
    hyp_count: dict[str, int] = {}
    bad: list[dict] = []
    n = 0
    for ell0, nu, alpha in itertools.product(axes["ell0"], axes["nu"], axes["alpha"]):
        norms = list(axes["f_l2"])
        if boundary:
            p = 2 - alpha / 2 if alpha < 1 else alpha + 0.5
            norms += [2 * ell0**2.5, ell0**2.5, 2 * ell0**p, ell0**p]
        for f_l2 in norms:
            F = f_l2 / ell0**1.5
            n += 1
            for uf in axes["u_factor"]:
                res = implications_at(float(ell0), float(nu), float(f_l2), float(alpha), float(uf * F))
                for name, (hyp, concl) in res.items():
                    if hyp:
                        hyp_count[name] = hyp_count.get(name, 0) + 1
                        if not concl:
                            bad.append({
                                "implication": name, "ell0": float(ell0), "nu": float(nu),
                                "f_l2": float(f_l2), "alpha": float(alpha), "U": float(uf * F),
                            })
    return SweepResult(n, hyp_count, bad)
