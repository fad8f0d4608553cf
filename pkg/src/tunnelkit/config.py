"""Run configuration: flat ``key.path = value`` text format.

Grammar (one statement per line):

    key.path = value            # '#' starts a comment, blank lines ignored

Values are typed by the schema: float, int, bool (true/false), string, or
a whitespace-separated list.  Floats serialize with 17 significant digits
so parse -> serialize -> parse is the identity.  Validation collects every
problem (path and reason) before reporting; nothing is computed from an
invalid configuration.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import ConfigError
from .propagator import AbsorberSpec, PropagatorConfig
from .pulse import LaserPulse


@dataclass(frozen=True)
class PulseCfg:
    E0: float = 0.08
    omega: float = 0.057
    t_start: float = 0.0


@dataclass(frozen=True)
class PotentialCfg:
    kind: str = "soft_core"
    Z: float = 1.0
    a: float = 1.0


@dataclass(frozen=True)
class GridCfg:
    z_min: float = -60.0
    z_max: float = 60.0
    n_z: int = 481
    rho_max: float = 30.0
    n_rho: int = 120


@dataclass(frozen=True)
class GroundstateCfg:
    dt_imag: float = 0.01
    tol: float = 1e-10
    max_iters: int = 200_000


@dataclass(frozen=True)
class PropagationCfg:
    dt: float = 0.02
    t_end: float = 0.0            # 0 = propagate to the end of the pulse
    snapshot_times: tuple = ()
    absorber: str = "mask"
    absorber_width: float = 12.0
    absorber_strength: float = 1.0
    scheme_order: int = 2


@dataclass(frozen=True)
class PhaseSpaceCfg:
    z_lo: float = 0.0             # z_lo == z_hi = auto (box minus absorber rim)
    z_hi: float = 0.0
    window_width: float = 60.0
    window_overlap: float = 0.1
    p0_floor: float = 1e-8
    reduction_mode: str = "density_matrix"
    report_mode_discrepancy: bool = True


@dataclass(frozen=True)
class TrajectoriesCfg:
    t_i: float = 0.0
    families: tuple = ("simple_man", "qmf", "qmf_coulomb")
    dt: float = 0.01
    stride: int = 10
    magnetic_term: bool = True
    transverse_model: str = "zero"
    coulomb_eps: float = 0.1
    extend_after_pulse: float = 500.0
    onset_floor: float = 1e-6    # absolute outgoing-probability floor for onset


@dataclass(frozen=True)
class ReconstructionCfg:
    window_lo: float = 0.0        # lo == hi = auto (central half-cycle)
    window_hi: float = 0.0
    prior_model: str = "zero_exit"
    detector_table: str = ""


@dataclass(frozen=True)
class OutputCfg:
    directory: str = "out"
    precision: int = 17


@dataclass(frozen=True)
class ComputeCfg:
    backend: str = "auto"
    memory_budget_bytes: int = 4 << 30


@dataclass(frozen=True)
class RunConfig:
    pulse: PulseCfg = field(default_factory=PulseCfg)
    potential: PotentialCfg = field(default_factory=PotentialCfg)
    grid: GridCfg = field(default_factory=GridCfg)
    groundstate: GroundstateCfg = field(default_factory=GroundstateCfg)
    propagation: PropagationCfg = field(default_factory=PropagationCfg)
    phase_space: PhaseSpaceCfg = field(default_factory=PhaseSpaceCfg)
    trajectories: TrajectoriesCfg = field(default_factory=TrajectoriesCfg)
    reconstruction: ReconstructionCfg = field(default_factory=ReconstructionCfg)
    output: OutputCfg = field(default_factory=OutputCfg)
    compute: ComputeCfg = field(default_factory=ComputeCfg)

    def laser_pulse(self) -> LaserPulse:
        return LaserPulse(E0=self.pulse.E0, omega=self.pulse.omega,
                          t_start=self.pulse.t_start)

    def t_end_resolved(self) -> float:
        if self.propagation.t_end > 0:
            return self.propagation.t_end
        return self.laser_pulse().duration

    def propagator_config(self) -> PropagatorConfig:
        p = self.propagation
        return PropagatorConfig(
            dt=p.dt, t_end=self.t_end_resolved(),
            snapshot_times=tuple(p.snapshot_times),
            absorber=AbsorberSpec(kind=p.absorber, width=p.absorber_width,
                                  strength=p.absorber_strength),
            scheme_order=p.scheme_order)

    def analysis_region(self) -> tuple:
        # default: the full box.  The masked boundary is a true zero, so
        # Wigner windows never cut through finite amplitude; sub-box
        # regions are sound only where the state has decayed at the edges.
        ps = self.phase_space
        if ps.z_lo != ps.z_hi:
            return (ps.z_lo, ps.z_hi)
        return (self.grid.z_min, self.grid.z_max)

    def reconstruction_window(self) -> Optional[tuple]:
        r = self.reconstruction
        if r.window_lo != r.window_hi:
            return (r.window_lo, r.window_hi)
        return None


_SECTIONS = {
    "pulse": PulseCfg,
    "potential": PotentialCfg,
    "grid": GridCfg,
    "groundstate": GroundstateCfg,
    "propagation": PropagationCfg,
    "phase_space": PhaseSpaceCfg,
    "trajectories": TrajectoriesCfg,
    "reconstruction": ReconstructionCfg,
    "output": OutputCfg,
    "compute": ComputeCfg,
}

_FLOAT_LIST_KEYS = {"propagation.snapshot_times"}
_STR_LIST_KEYS = {"trajectories.families"}
_CHOICES = {
    "potential.kind": ("coulomb", "soft_core"),
    "propagation.absorber": ("none", "mask"),
    "phase_space.reduction_mode": ("density_matrix", "amplitude"),
    "trajectories.transverse_model": ("zero", "current_based"),
    "reconstruction.prior_model": ("zero_exit", "qmf_table"),
    "compute.backend": ("auto", "cython", "numpy"),
}
_FAMILY_CHOICES = ("simple_man", "qmf", "qmf_coulomb")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (tuple, list)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _parse_scalar(token: str, ftype, path: str, problems: list):
    if ftype is bool:
        if token in ("true", "false"):
            return token == "true"
        problems.append((path, f"expected true/false, got {token!r}"))
        return None
    if ftype is int:
        try:
            return int(token)
        except ValueError:
            problems.append((path, f"expected integer, got {token!r}"))
            return None
    if ftype is float:
        try:
            return float(token)
        except ValueError:
            problems.append((path, f"expected number, got {token!r}"))
            return None
    return token


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError listing every problem."""
    problems: list = []
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stmt = line.split("#", 1)[0].strip()
        if not stmt:
            continue
        if "=" not in stmt:
            problems.append((f"line {lineno}", f"expected 'key = value', got {stmt!r}"))
            continue
        key, val = (s.strip() for s in stmt.split("=", 1))
        if key in raw:
            problems.append((key, "duplicate key"))
            continue
        raw[key] = val

    values: dict = {name: {} for name in _SECTIONS}
    for key, val in raw.items():
        if "." not in key:
            problems.append((key, "unknown key"))
            continue
        section, name = key.split(".", 1)
        cls = _SECTIONS.get(section)
        fmap = {f.name: f for f in fields(cls)} if cls else {}
        if cls is None or name not in fmap:
            problems.append((key, "unknown key"))
            continue
        tokens = val.split()
        if key in _FLOAT_LIST_KEYS:
            out = tuple(_parse_scalar(t, float, key, problems) for t in tokens)
            values[section][name] = out
        elif key in _STR_LIST_KEYS:
            values[section][name] = tuple(tokens)
        else:
            ftype = fmap[name].type
            typ = {"float": float, "int": int, "bool": bool, "str": str}.get(ftype, str)
            if len(tokens) != 1 and typ is not str:
                problems.append((key, f"expected a single value, got {val!r}"))
                continue
            token = tokens[0] if tokens else ""
            if typ is str:
                values[section][name] = val.strip()
            else:
                parsed = _parse_scalar(token, typ, key, problems)
                if parsed is not None:
                    values[section][name] = parsed

    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(**{name: cls(**values[name]) for name, cls in _SECTIONS.items()})
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Full validation; raises ConfigError with every violation."""
    p: list = []

    def check(cond, path, reason):
        if not cond:
            p.append((path, reason))

    check(cfg.pulse.E0 >= 0, "pulse.E0", "must be >= 0")
    check(cfg.pulse.omega > 0, "pulse.omega", "must be > 0")

    check(cfg.potential.Z >= 0, "potential.Z", "must be >= 0")
    for path, choices in _CHOICES.items():
        section, name = path.split(".")
        val = getattr(getattr(cfg, section), name)
        check(val in choices, path, f"must be one of {', '.join(choices)}")
    if cfg.potential.kind == "soft_core":
        check(cfg.potential.a > 0, "potential.a", "must be > 0 for soft_core")

    g = cfg.grid
    check(g.n_z >= 8, "grid.n_z", "must be >= 8")
    check(g.n_rho >= 8, "grid.n_rho", "must be >= 8")
    check(g.z_min < 0 < g.z_max, "grid.z_min", "z grid must bracket z = 0")
    check(g.rho_max > 0, "grid.rho_max", "must be > 0")
    if g.n_z >= 8 and g.z_min < 0 < g.z_max:
        dz = (g.z_max - g.z_min) / (g.n_z - 1)
        k = g.z_min / dz
        check(abs(k - round(k)) < 1e-9, "grid.z_min",
              "z grid must contain z = 0 (z_min must be a multiple of dz)")

    check(cfg.groundstate.dt_imag > 0, "groundstate.dt_imag", "must be > 0")
    check(cfg.groundstate.tol > 0, "groundstate.tol", "must be > 0")
    check(cfg.groundstate.max_iters > 0, "groundstate.max_iters", "must be > 0")

    pr = cfg.propagation
    check(pr.dt > 0, "propagation.dt", "must be > 0")
    check(pr.scheme_order == 2, "propagation.scheme_order",
          "only the second-order scheme is implemented")
    check(pr.t_end >= 0, "propagation.t_end", "must be >= 0 (0 = pulse end)")
    if pr.dt > 0 and cfg.pulse.omega > 0 and pr.t_end >= 0:
        t_end = cfg.t_end_resolved()
        for t in pr.snapshot_times:
            check(0.0 <= t <= t_end + 1e-9, "propagation.snapshot_times",
                  f"time {t:g} outside [0, {t_end:g}]")
    if pr.absorber == "mask" and g.rho_max > 0 and g.z_max > g.z_min:
        check(pr.absorber_width > 0, "propagation.absorber_width", "must be > 0")
        check(pr.absorber_width < 0.5 * min(g.z_max - g.z_min, g.rho_max),
              "propagation.absorber_width", "must be < half the box size")

    ps = cfg.phase_space
    check(ps.window_width > 0, "phase_space.window_width", "must be > 0")
    check(0.0 <= ps.window_overlap <= 0.5, "phase_space.window_overlap",
          "must be in [0, 0.5]")
    check(ps.p0_floor > 0, "phase_space.p0_floor", "must be > 0")
    if ps.z_lo != ps.z_hi:
        check(ps.z_lo < ps.z_hi, "phase_space.z_lo", "must be < phase_space.z_hi")
        check(ps.z_lo >= g.z_min and ps.z_hi <= g.z_max, "phase_space.z_lo",
              "analysis region must lie inside the grid")

    tr = cfg.trajectories
    check(tr.dt > 0, "trajectories.dt", "must be > 0")
    check(tr.stride >= 1, "trajectories.stride", "must be >= 1")
    check(tr.coulomb_eps > 0, "trajectories.coulomb_eps", "must be > 0")
    check(tr.extend_after_pulse >= 0, "trajectories.extend_after_pulse", "must be >= 0")
    check(tr.onset_floor > 0, "trajectories.onset_floor", "must be > 0")
    for fam in tr.families:
        check(fam in _FAMILY_CHOICES, "trajectories.families",
              f"unknown family {fam!r} (choices: {', '.join(_FAMILY_CHOICES)})")
    if tr.families and cfg.pulse.E0 > 0 and cfg.pulse.omega > 0:
        pulse = cfg.laser_pulse()
        check(pulse.t_start <= tr.t_i <= pulse.t_end, "trajectories.t_i",
              "must lie inside the pulse support")
        if pr.snapshot_times and pr.dt > 0:
            near = min(abs(t - tr.t_i) for t in pr.snapshot_times)
            check(near <= 0.5 * pr.dt + 1e-12, "trajectories.t_i",
                  "a snapshot within dt/2 of t_i is required for QMF seeding")

    rc = cfg.reconstruction
    if rc.window_lo != rc.window_hi and cfg.pulse.omega > 0:
        pulse = cfg.laser_pulse()
        check(rc.window_lo < rc.window_hi, "reconstruction.window_lo",
              "must be < reconstruction.window_hi")
        check(rc.window_lo >= pulse.t_start and rc.window_hi <= pulse.t_end,
              "reconstruction.window_lo", "window must lie inside the pulse support")

    check(6 <= cfg.output.precision <= 17, "output.precision", "must be in [6, 17]")
    check(cfg.compute.memory_budget_bytes > 0, "compute.memory_budget_bytes",
          "must be > 0")

    if p:
        raise ConfigError(p)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form (schema order); round-trips through parse_config."""
    lines = []
    for section, cls in _SECTIONS.items():
        obj = getattr(cfg, section)
        for f in fields(cls):
            lines.append(f"{section}.{f.name} = {_fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
