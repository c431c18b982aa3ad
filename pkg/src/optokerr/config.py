"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment; blank lines are
ignored.  Every key must come from :data:`KEYS`.  ``drive2.delta`` may be
``optimal``, meaning ``-drive1.delta - 2 kappa`` re-evaluated at every
sweep point.  Example::

    kerr = 0.001
    drive1.delta = 1.0
    drive1.kappa = 0.05
    drive2.delta = optimal
    mode = analytic,qme
    sweep.axis1.name = kappa
    sweep.axis1.start = 0.03
    sweep.axis1.stop = 0.08
    sweep.axis1.count = 3
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .model import Drive, SystemParams

TIERS = ("analytic", "fokker-planck", "langevin", "qme")
MODE_ALIASES = {"fp": "fokker-planck", "compare": ",".join(TIERS)}
FORMATS = ("csv", "json")
OPTIMAL = "optimal"

# key -> (parser name, default)
KEYS = {
    "omega_m": ("float", 1.0),
    "kerr": ("float", 0.001),
    "gamma_m": ("float", 0.0),
    "n_bath": ("float", 0.0),
    "drive1.delta": ("float", 1.0),
    "drive1.g": ("float", 0.001),
    "drive1.kappa": ("float", 0.1),
    "drive2.delta": ("delta2", None),
    "drive2.g": ("float", None),
    "drive2.kappa": ("float", None),
    "mode": ("mode", "analytic"),
    "sweep.jobs": ("int", 1),
    "sim.t_total": ("float", None),
    "sim.burn_in": ("float", None),
    "sim.dt": ("float", 0.017),
    "sim.trajectories": ("int", 200),
    "sim.seed": ("int", 0),
    "sim.tier": ("str", "full"),
    "sim.scheme": ("str", "heun"),
    "sim.sample_every": ("int", 1),
    "sim.dump_every": ("int", None),
    "fock.dim_mech": ("int", 60),
    "fock.dim_cav": ("int", 3),
    "fock.max_dim": ("int", 2000),
    "fock.coherence_cutoff": ("int", 4),
    "fock.regularize": ("bool", True),
    "fock.converge": ("bool", False),
    "output.path": ("str", None),
    "output.format": ("str", "csv"),
    "output.trajectory_dump": ("str", None),
    "output.distribution_dump": ("str", None),
}
for _axis in ("axis1", "axis2"):
    KEYS[f"sweep.{_axis}.name"] = ("str", None)
    KEYS[f"sweep.{_axis}.start"] = ("float", None)
    KEYS[f"sweep.{_axis}.stop"] = ("float", None)
    KEYS[f"sweep.{_axis}.count"] = ("int", None)

# sweepable scalars; kappa and g move both cavities together
SWEEP_PARAMS = ("omega_m", "kerr", "gamma_m", "n_bath", "kappa", "g", "delta1", "delta2",
                "drive1.delta", "drive1.g", "drive1.kappa",
                "drive2.delta", "drive2.g", "drive2.kappa")
DEFAULT_AXIS_NAMES = {"axis1": "kappa", "axis2": "delta1"}


@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    count: int

    def values(self) -> list[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.count)]


@dataclass(frozen=True)
class PointParams:
    """Scalar parameters of one grid point before drives are assembled."""

    omega_m: float
    kerr: float
    gamma_m: float
    n_bath: float
    delta1: float
    g1: float
    kappa1: float
    delta2: float | str | None = None
    g2: float | None = None
    kappa2: float | None = None

    @property
    def two_drives(self) -> bool:
        return self.delta2 is not None

    def resolved_delta2(self) -> float | None:
        if self.delta2 == OPTIMAL:
            return -self.delta1 - 2.0 * self.kappa1
        return self.delta2

    def system(self) -> SystemParams:
        drives = [Drive(self.delta1, self.g1, self.kappa1)]
        if self.two_drives:
            drives.append(Drive(self.resolved_delta2(),
                                self.g1 if self.g2 is None else self.g2,
                                self.kappa1 if self.kappa2 is None else self.kappa2))
        return SystemParams(kerr=self.kerr, mech_decay=self.gamma_m, drives=tuple(drives),
                            bath_occupation=self.n_bath, mech_frequency=self.omega_m)

    def with_value(self, name: str, value: float) -> "PointParams":
        if name == "kappa":
            return replace(self, kappa1=value, kappa2=None if self.kappa2 is None else value)
        if name == "g":
            return replace(self, g1=value, g2=None if self.g2 is None else value)
        field_name = {"delta1": "delta1", "delta2": "delta2", "drive1.delta": "delta1",
                      "drive1.g": "g1", "drive1.kappa": "kappa1", "drive2.delta": "delta2",
                      "drive2.g": "g2", "drive2.kappa": "kappa2"}.get(name, name)
        return replace(self, **{field_name: value})


@dataclass(frozen=True)
class SimSettings:
    t_total: float | None = None
    burn_in: float | None = None
    dt: float = 0.017
    trajectories: int = 200
    seed: int = 0
    tier: str = "full"
    scheme: str = "heun"
    sample_every: int = 1
    dump_every: int | None = None


@dataclass(frozen=True)
class FockSettings:
    dim_mech: int = 60
    dim_cav: int = 3
    max_dim: int = 2000
    coherence_cutoff: int = 4
    regularize: bool = True
    converge: bool = False


@dataclass(frozen=True)
class RunConfig:
    base: PointParams
    tiers: tuple[str, ...] = ("analytic",)
    axes: tuple[SweepAxis, ...] = ()
    jobs: int = 1
    sim: SimSettings = field(default_factory=SimSettings)
    fock: FockSettings = field(default_factory=FockSettings)
    output_path: str | None = None
    output_format: str = "csv"
    trajectory_dump: str | None = None
    distribution_dump: str | None = None

    @property
    def n_points(self) -> int:
        return int(np.prod([a.count for a in self.axes])) if self.axes else 1

    def points(self) -> list[PointParams]:
        """Grid points in row-major order (last axis fastest)."""
        pts = [self.base]
        for axis in self.axes:
            pts = [pt.with_value(axis.name, v) for pt in pts for v in axis.values()]
        return pts


def parse_tiers(text: str, *, key: str = "mode", line: int | None = None) -> tuple[str, ...]:
    """``compare`` or a comma list of tier names."""
    names = []
    for raw in text.split(","):
        name = raw.strip().lower()
        name = MODE_ALIASES.get(name, name)
        for part in name.split(","):
            if part not in TIERS:
                raise ConfigError(f"unknown mode {raw.strip()!r}; choose from "
                                  f"{', '.join(TIERS)} or compare", key=key, line=line)
            if part not in names:
                names.append(part)
    if not names:
        raise ConfigError("empty mode", key=key, line=line)
    return tuple(t for t in TIERS if t in names)


def _convert(kind: str, text: str, key: str, line: int):
    try:
        if kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if kind == "int":
            return int(text)
        if kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if kind == "delta2":
            return OPTIMAL if text.lower() == OPTIMAL else _convert("float", text, key, line)
        if kind == "mode":
            return parse_tiers(text, key=key, line=line)
        return text
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as {kind}", key=key, line=line) from None


def _tokenize(text: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", line=lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", line=lineno)
        if key not in KEYS:
            raise ConfigError("unknown key", key=key, line=lineno)
        if not value:
            raise ConfigError("missing value", key=key, line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key (first set on line {entries[key][1]})",
                              key=key, line=lineno)
        entries[key] = (value, lineno)
    return entries


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration text.

    Raises
    ------
    ConfigError
        On malformed lines, unknown or duplicate keys, unreadable values
        and physically invalid parameters; the message names the line
        and key.
    """
    entries = _tokenize(text)
    vals, lines = {}, {}
    for key, (kind, default) in KEYS.items():
        if key in entries:
            raw, lineno = entries[key]
            vals[key] = _convert(kind, raw, key, lineno)
            lines[key] = lineno
        else:
            vals[key] = default

    def fail(msg, key):
        raise ConfigError(msg, key=key, line=lines.get(key))

    for key in ("kerr", "gamma_m", "n_bath", "drive1.g", "drive2.g"):
        if vals[key] is not None and vals[key] < 0:
            fail(f"must be >= 0, got {vals[key]}", key)
    for key in ("omega_m", "drive1.kappa", "drive2.kappa", "sim.dt"):
        if vals[key] is not None and vals[key] <= 0:
            fail(f"must be > 0, got {vals[key]}", key)
    for key in ("sim.t_total", "sim.burn_in"):
        if vals[key] is not None and vals[key] <= 0:
            fail(f"must be > 0, got {vals[key]}", key)
    for key in ("sweep.jobs", "sim.trajectories", "sim.sample_every"):
        if vals[key] < 1:
            fail(f"must be >= 1, got {vals[key]}", key)
    if vals["sim.dump_every"] is not None and vals["sim.dump_every"] < 1:
        fail("must be >= 1", "sim.dump_every")
    if vals["fock.dim_mech"] < 2:
        fail("must be >= 2", "fock.dim_mech")
    if vals["fock.dim_cav"] < 2:
        fail("must be >= 2", "fock.dim_cav")
    if vals["fock.coherence_cutoff"] < 0:
        fail("must be >= 0", "fock.coherence_cutoff")
    if vals["sim.tier"] not in ("full", "full-coupled", "reduced", "reduced-radial"):
        fail("must be full or reduced", "sim.tier")
    if vals["sim.scheme"] not in ("heun", "euler"):
        fail("must be heun or euler", "sim.scheme")
    fmt = vals["output.format"].lower()
    if fmt not in FORMATS:
        fail(f"must be one of {', '.join(FORMATS)}", "output.format")
    if vals["drive2.delta"] == OPTIMAL and vals["drive1.delta"] <= 0:
        fail("optimal second detuning needs a blue first drive (drive1.delta > 0)", "drive2.delta")
    drive2_keys = [k for k in ("drive2.g", "drive2.kappa") if k in entries]
    if drive2_keys and vals["drive2.delta"] is None:
        fail("drive2.delta is required when other drive2 keys are given", drive2_keys[0])

    base = PointParams(omega_m=vals["omega_m"], kerr=vals["kerr"], gamma_m=vals["gamma_m"],
                       n_bath=vals["n_bath"], delta1=vals["drive1.delta"], g1=vals["drive1.g"],
                       kappa1=vals["drive1.kappa"], delta2=vals["drive2.delta"],
                       g2=vals["drive2.g"], kappa2=vals["drive2.kappa"])
    axes = []
    for name in ("axis1", "axis2"):
        keys = [f"sweep.{name}.{f}" for f in ("name", "start", "stop", "count")]
        given = [k for k in keys if k in entries]
        if not given:
            continue
        missing = [k for k in keys[1:] if k not in entries]
        if missing:
            fail(f"sweep axis incomplete: missing {', '.join(missing)}", given[0])
        pname = vals[keys[0]] or DEFAULT_AXIS_NAMES[name]
        if pname not in SWEEP_PARAMS:
            fail(f"cannot sweep {pname!r}; choose from {', '.join(SWEEP_PARAMS)}", keys[0])
        if pname.startswith(("drive2", "delta2")) and base.delta2 is None:
            fail("cannot sweep a second-drive parameter without drive2.delta", keys[0])
        if vals[keys[3]] < 1:
            fail("must be >= 1", keys[3])
        axes.append(SweepAxis(pname, vals[keys[1]], vals[keys[2]], vals[keys[3]]))
    if len(axes) == 2 and axes[0].name == axes[1].name:
        fail("both sweep axes name the same parameter", "sweep.axis2.name")
    if "sweep.axis2.name" in entries and not axes[:1]:
        fail("sweep.axis2 needs sweep.axis1", "sweep.axis2.name")

    cfg = RunConfig(
        base=base, tiers=vals["mode"] if isinstance(vals["mode"], tuple) else parse_tiers(vals["mode"]),
        axes=tuple(axes), jobs=vals["sweep.jobs"],
        sim=SimSettings(t_total=vals["sim.t_total"], burn_in=vals["sim.burn_in"], dt=vals["sim.dt"],
                        trajectories=vals["sim.trajectories"], seed=vals["sim.seed"],
                        tier=vals["sim.tier"], scheme=vals["sim.scheme"],
                        sample_every=vals["sim.sample_every"], dump_every=vals["sim.dump_every"]),
        fock=FockSettings(dim_mech=vals["fock.dim_mech"], dim_cav=vals["fock.dim_cav"],
                          max_dim=vals["fock.max_dim"],
                          coherence_cutoff=vals["fock.coherence_cutoff"],
                          regularize=vals["fock.regularize"], converge=vals["fock.converge"]),
        output_path=vals["output.path"], output_format=fmt,
        trajectory_dump=vals["output.trajectory_dump"],
        distribution_dump=vals["output.distribution_dump"])
    _validate_points(cfg, lines)
    return cfg


def _validate_points(cfg: RunConfig, lines: dict) -> None:
    # every grid point must assemble into valid physical parameters
    for pt in cfg.points():
        try:
            pt.system()
        except (ValueError, TypeError) as exc:
            key = "sweep.axis1.name" if cfg.axes else None
            raise ConfigError(f"invalid parameters at {pt}: {exc}", key=key,
                              line=lines.get(key)) from None


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config(text)
