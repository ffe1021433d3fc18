"""
Experiment configuration: a flat INI file with sections model, force,
damping, grid, time, initial and output.

Times accept either a number or ``<x>/beta`` (x damping times), resolved
once the damping rate is known. Example::

    [model]
    type = nse            ; nse | fractional_nse | stokes
    alpha = 2
    nu = 1.4142135623730951
    delta = 0
    epsilon = 0

    [force]
    shape = ball_indicator ; ball_indicator | shell | custom_radial
    amplitude = 5.656854249492381
    ell0 = 1
    c = 0.5
    inner = 0              ; shell only
    table_radii =          ; custom_radial only, comma separated
    table_values =

    [damping]
    rule = beta_from_force ; beta_from_force | beta_from_viscosity | explicit
    value =

    [grid]
    L = 50.26548245743669
    n = 32

    [time]
    dt = 0.02/beta
    cfl =                  ; empty = fixed dt
    t_end = 20/beta
    burn_in = 5/beta
    measure_scheme = false

    [initial]
    condition = zero       ; zero | random_lowpass
    seed = 0
    energy = 0
    cutoff = 0

    [output]
    directory = runs/section5
    regimes = classical, small_grashof
    checkpoint = false
    K = 2
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace

from .bounds import REGIMES
from .errors import ConfigError
from .forcing import DampingRule, ForceProfile, continuum_norms, damping_beta
from .solver import InitialCondition
from .spectral import GridSpec

MODELS = ("nse", "fractional_nse", "stokes")

SCHEMA = {
    "model": ("type", "alpha", "nu", "delta", "epsilon"),
    "force": ("shape", "amplitude", "ell0", "c", "inner", "table_radii", "table_values"),
    "damping": ("rule", "value"),
    "grid": ("l", "n"),
    "time": ("dt", "cfl", "t_end", "burn_in", "measure_scheme"),
    "initial": ("condition", "seed", "energy", "cutoff"),
    "output": ("directory", "regimes", "checkpoint", "k"),
}
REQUIRED = {
    "model": ("type", "nu"),
    "force": ("shape", "amplitude", "ell0", "c"),
    "damping": ("rule",),
    "grid": ("l", "n"),
    "time": ("dt", "t_end"),
}


@dataclass(frozen=True)
class TimeSpec:
    """A time given either absolutely or in damping times (value / beta)."""

    value: float
    per_beta: bool = False

    def resolve(self, beta: float) -> float:
        return self.value / beta if self.per_beta else self.value

    def __str__(self):
        return f"{self.value!r}/beta" if self.per_beta else repr(self.value)

    @classmethod
    def parse(cls, text: str) -> TimeSpec:
        text = text.strip()
        m = re.fullmatch(r"(.+?)\s*/\s*beta", text)
        if m:
            return cls(float(m.group(1)), True)
        return cls(float(text))


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    force: ForceProfile
    damping: DampingRule
    nu: float
    grid_L: float
    grid_n: int
    dt: TimeSpec
    t_end: TimeSpec
    burn_in: TimeSpec = TimeSpec(0.0)
    alpha: float = 2.0
    delta: float = 0.0
    epsilon: float = 0.0
    cfl: float | None = None
    initial: InitialCondition = field(default_factory=InitialCondition)
    output_dir: str = "runs/experiment"
    regimes: tuple[str, ...] = ("classical",)
    checkpoint: bool = False
    K: float = 2.0
    measure_scheme: bool = False

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.grid_L, self.grid_n)

    @property
    def transport(self) -> bool:
        return self.model != "stokes"

    def resolve_beta(self) -> float:
        return damping_beta(self.damping, continuum_norms(self.force), self.nu, self.force.ell0)

    def validate(self) -> ExperimentConfig:
        """Cross-field checks; raises ConfigError naming the offending field."""
        if self.model not in MODELS:
            raise ConfigError(f"[model] type: unknown model {self.model!r}")
        if self.model == "fractional_nse" and not 0 < self.alpha < 4:
            raise ConfigError(f"[model] alpha: must lie in (0, 4), got {self.alpha}")
        if self.model != "fractional_nse" and self.alpha != 2:
            raise ConfigError(f"[model] alpha: only fractional_nse may set alpha != 2")
        if not self.nu > 0:
            raise ConfigError(f"[model] nu: must be positive, got {self.nu}")
        try:
            grid = self.grid
        except ValueError as exc:
            raise ConfigError(f"[grid] {exc}") from None
        if self.force.radius > grid.dealias_cutoff:
            raise ConfigError(
                f"[force] c: support radius c/ell0 = {self.force.radius:.6g} exceeds the dealias "
                f"cutoff {grid.dealias_cutoff:.6g} of the grid (L={self.grid_L}, n={self.grid_n})"
            )
        try:
            beta = self.resolve_beta()
        except ValueError as exc:
            raise ConfigError(f"[damping] rule: {exc}") from None
        t_end, burn = self.t_end.resolve(beta), self.burn_in.resolve(beta)
        if not burn < t_end:
            raise ConfigError(f"[time] burn_in: {burn:.6g} must be < t_end {t_end:.6g}")
        if t_end - burn < 10 / beta * (1 - 1e-12):
            raise ConfigError(
                f"[time] t_end: averaging window {t_end - burn:.6g} shorter than 10/beta = {10 / beta:.6g}"
            )
        if not self.dt.resolve(beta) > 0:
            raise ConfigError("[time] dt: must be positive")
        bad = set(self.regimes) - set(REGIMES)
        if bad:
            raise ConfigError(f"[output] regimes: unknown {sorted(bad)}")
        if "appendix_c" in self.regimes and self.damping.rule != "beta_from_viscosity":
            raise ConfigError("[output] regimes: appendix_c needs [damping] rule = beta_from_viscosity")
        if "fractional" in self.regimes and not 3 / 7 < self.alpha < 3:
            raise ConfigError(f"[output] regimes: fractional law needs 3/7 < alpha < 3, got {self.alpha}")
        return self


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip().lower()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return i
    return None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate INI text; errors name the line, section and key."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    def where(section, key):
        line = _line_of(text, section, key)
        return f"{source}:{line}: [{section}] {key}" if line else f"{source}: [{section}] {key}"

    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{where(section, key)}: unknown key")
    for section, keys in REQUIRED.items():
        for key in keys:
            if not cp.has_option(section, key) or not cp[section][key].strip():
                raise ConfigError(f"{source}: [{section}] {key}: required")

    def get(section, key, conv=str, default=None):
        if not cp.has_option(section, key) or not cp[section][key].strip():
            return default
        raw = cp[section][key].strip()
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{where(section, key)}: cannot parse {raw!r} ({exc})") from None

    def floats(raw):
        return tuple(float(x) for x in raw.split(",") if x.strip())

    def boolean(raw):
        v = raw.lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")

    radii, values = get("force", "table_radii", floats), get("force", "table_values", floats)
    table = (radii, values) if radii is not None else None
    try:
        force = ForceProfile(
            shape=get("force", "shape"),
            amplitude=get("force", "amplitude", float),
            ell0=get("force", "ell0", float),
            c=get("force", "c", float),
            inner=get("force", "inner", float, 0.0),
            table=table,
            alpha=get("model", "alpha", float, 2.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: [force] {exc}") from None
    try:
        damping = DampingRule(get("damping", "rule"), get("damping", "value", float))
    except ValueError as exc:
        raise ConfigError(f"{where('damping', 'rule')}: {exc}") from None

    condition = get("initial", "condition", str, "zero")
    if condition not in ("zero", "random_lowpass"):
        raise ConfigError(f"{where('initial', 'condition')}: unknown initial condition {condition!r}")
    initial = InitialCondition(
        kind=condition,
        seed=get("initial", "seed", int, 0),
        energy=get("initial", "energy", float, 0.0),
        cutoff=get("initial", "cutoff", float, 0.0),
    )
    regimes = get("output", "regimes", lambda s: tuple(r.strip() for r in s.split(",") if r.strip()))
    model = get("model", "type")
    cfg = ExperimentConfig(
        model=model,
        force=force,
        damping=damping,
        nu=get("model", "nu", float),
        grid_L=get("grid", "l", float),
        grid_n=get("grid", "n", int),
        dt=get("time", "dt", TimeSpec.parse),
        t_end=get("time", "t_end", TimeSpec.parse),
        burn_in=get("time", "burn_in", TimeSpec.parse, TimeSpec(0.0)),
        alpha=get("model", "alpha", float, 2.0),
        delta=get("model", "delta", float, 0.0),
        epsilon=get("model", "epsilon", float, 0.0),
        cfl=get("time", "cfl", float),
        initial=initial,
        output_dir=get("output", "directory", str, "runs/experiment"),
        regimes=regimes or default_regimes(model, damping.rule),
        checkpoint=get("output", "checkpoint", boolean, False),
        K=get("output", "k", float, 2.0),
        measure_scheme=get("time", "measure_scheme", boolean, False),
    )
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


def default_regimes(model: str, rule: str) -> tuple[str, ...]:
    if rule == "beta_from_viscosity":
        return ("appendix_c",)
    return {"nse": ("classical",), "fractional_nse": ("fractional",), "stokes": ("stokes",)}[model]


def to_ini(cfg: ExperimentConfig) -> str:
    f = cfg.force
    table_r = ", ".join(repr(x) for x in f.table[0]) if f.table else ""
    table_v = ", ".join(repr(x) for x in f.table[1]) if f.table else ""
    sections = {
        "model": {
            "type": cfg.model, "alpha": repr(cfg.alpha), "nu": repr(cfg.nu),
            "delta": repr(cfg.delta), "epsilon": repr(cfg.epsilon),
        },
        "force": {
            "shape": f.shape, "amplitude": repr(f.amplitude), "ell0": repr(f.ell0), "c": repr(f.c),
            "inner": repr(f.inner), "table_radii": table_r, "table_values": table_v,
        },
        "damping": {
            "rule": cfg.damping.rule,
            "value": "" if cfg.damping.value is None else repr(cfg.damping.value),
        },
        "grid": {"L": repr(cfg.grid_L), "n": str(cfg.grid_n)},
        "time": {
            "dt": str(cfg.dt), "cfl": "" if cfg.cfl is None else repr(cfg.cfl),
            "t_end": str(cfg.t_end), "burn_in": str(cfg.burn_in),
            "measure_scheme": str(cfg.measure_scheme).lower(),
        },
        "initial": {
            "condition": cfg.initial.kind, "seed": str(cfg.initial.seed),
            "energy": repr(cfg.initial.energy), "cutoff": repr(cfg.initial.cutoff),
        },
        "output": {
            "directory": cfg.output_dir, "regimes": ", ".join(cfg.regimes),
            "checkpoint": str(cfg.checkpoint).lower(), "K": repr(cfg.K),
        },
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {v}" for k, v in items.items()]
        lines.append("")
    return "\n".join(lines)


# --- presets -----------------------------------------------------------------

PRESETS = ("section5", "theorem31_demo", "fractional_demo", "stokes_demo", "appendixC_demo")


def preset(name: str) -> ExperimentConfig:
    """Named parameter sets. ``fractional_demo:<alpha>`` picks the exponent (default 1.5).

    Raises:
        ConfigError: unknown preset name.
    """
    base, _, arg = name.partition(":")
    if base == "section5":
        # box chosen so |k| < 1/2 holds lattice points (spacing 2 pi / L = 1/8)
        cfg = ExperimentConfig(
            model="nse",
            force=ForceProfile("ball_indicator", amplitude=2**2.5, ell0=1.0, c=0.5),
            damping=DampingRule("beta_from_force"),
            nu=math.sqrt(2),
            grid_L=16 * math.pi,
            grid_n=32,
            dt=TimeSpec(0.02, True),
            t_end=TimeSpec(20.0, True),
            burn_in=TimeSpec(5.0, True),
            output_dir="runs/section5",
            measure_scheme=True,
            regimes=("classical", "small_grashof"),
        )
    elif base in ("theorem31_demo", "fractional_demo"):
        alpha = float(arg) if arg else (1.5 if base == "fractional_demo" else 2.0)
        cfg = ExperimentConfig(
            model="nse" if base == "theorem31_demo" else "fractional_nse",
            force=ForceProfile("ball_indicator", amplitude=16.0, ell0=2.0, c=2.0, alpha=alpha),
            damping=DampingRule("beta_from_force"),
            nu=0.1,
            grid_L=16.0,
            grid_n=48 if base == "theorem31_demo" else 32,
            dt=TimeSpec(0.05, True),
            cfl=0.25,
            t_end=TimeSpec(20.0, True),
            burn_in=TimeSpec(5.0, True),
            alpha=alpha,
            output_dir=f"runs/{base}",
            regimes=("classical",) if base == "theorem31_demo" else ("fractional",),
            # the n = 48 run is the expensive one; skip the half-step rerun there
            measure_scheme=base == "fractional_demo",
        )
    elif base == "stokes_demo":
        cfg = ExperimentConfig(
            model="stokes",
            force=ForceProfile("ball_indicator", amplitude=2**2.5, ell0=1.0, c=2.0),
            damping=DampingRule("beta_from_force"),
            nu=math.sqrt(2),
            grid_L=8.0,
            grid_n=32,
            dt=TimeSpec(0.01, True),
            t_end=TimeSpec(20.0, True),
            burn_in=TimeSpec(5.0, True),
            output_dir="runs/stokes_demo",
            measure_scheme=True,
            regimes=("stokes",),
        )
    elif base == "appendixC_demo":
        cfg = ExperimentConfig(
            model="nse",
            force=ForceProfile("ball_indicator", amplitude=1.0, ell0=1.0, c=2.0),
            damping=DampingRule("beta_from_viscosity"),
            nu=1.0,
            grid_L=8.0,
            grid_n=32,
            dt=TimeSpec(0.05),
            cfl=0.25,
            t_end=TimeSpec(20.0, True),
            burn_in=TimeSpec(5.0, True),
            output_dir="runs/appendixC_demo",
            measure_scheme=True,
            regimes=("appendix_c",),
        )
    else:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    return cfg.validate()


def with_changes(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes).validate()
