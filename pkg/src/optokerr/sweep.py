"""Grid evaluation of the solver tiers and tabular output.

Cell conventions in a :class:`ComparisonRow`:

* ``None``: tier not requested (empty CSV cell, JSON ``null``);
* :data:`NO_LIMIT_CYCLE`: the tier needs a limit cycle and there is none;
* :data:`FAILED`: the solver raised; the message is kept in ``failures``;
* :data:`UNCONVERGED`: the Fock truncation did not converge.
"""
from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import langevin, qme, semiclassical
from .config import PointParams, RunConfig
from .errors import (
    ConditioningWarning,
    DegenerateStateWarning,
    DomainError,
    NoLimitCycleError,
    OptoKerrError,
)

COLUMNS = ("kappa", "delta1", "delta2", "B0", "n_analytic", "F_analytic", "n_fp", "F_fp",
           "n_langevin", "F_langevin", "n_langevin_err", "F_langevin_err", "n_qme", "F_qme",
           "rel_dev_F", "valid_rwa", "limit_cycle")
NO_LIMIT_CYCLE = "no_limit_cycle"
FAILED = "failed"
UNCONVERGED = "unconverged"
SIG_DIGITS = 10

# default Langevin run length in units of the limit-cycle relaxation time
LANGEVIN_TOTAL_RELAXATIONS = 6.0
LANGEVIN_BURN_RELAXATIONS = 1.0
DEFAULT_DUMP_EVERY = 100


@dataclass
class ComparisonRow:
    cells: dict = field(default_factory=lambda: dict.fromkeys(COLUMNS))
    failures: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.cells[key]

    def __setitem__(self, key, value):
        if key not in self.cells:
            raise KeyError(key)
        self.cells[key] = value

    @property
    def limit_cycle(self) -> bool:
        return bool(self.cells["limit_cycle"])


def _numeric(x) -> bool:
    return isinstance(x, float) and math.isfinite(x)


def point_seed(master_seed: int, index: int) -> int:
    """Per-point seed derived from the master seed and the grid index."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint32)[0])


def _suffixed(path: str, index: int, n_points: int) -> Path:
    path = Path(path)
    if n_points == 1:
        return path
    return path.with_name(f"{path.stem}_{index}{path.suffix}")


def _analytic(p, lc, row):
    try:
        pred = semiclassical.closed_form_prediction(p)
        B0, n, F = pred.B0, pred.n_mean, pred.fano
    except (DomainError, NoLimitCycleError):
        # closed forms do not cover this setup; fall back to the numeric linearization
        B0, n, F = lc.B0, lc.n_mean, lc.fano
    row["B0"], row["n_analytic"], row["F_analytic"] = float(B0), float(n), float(F)


def _fokker_planck(p, row):
    dist = semiclassical.fp_steady_state(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateStateWarning)
        n, F = semiclassical.distribution_fano(dist)
    row["n_fp"], row["F_fp"] = n, F


def _langevin(p, lc, cfg: RunConfig, index, row):
    s = cfg.sim
    t_total, burn_in = s.t_total, s.burn_in
    if lc is not None:
        tau = 1.0 / lc.Gamma_L
    else:
        rate = p.mech_decay + sum(d.coupling**2 / d.cavity_decay for d in p.drives)
        tau = 1.0 / rate if rate > 0 else None
    if t_total is None:
        if tau is None:
            raise DomainError("no relaxation scale: set sim.t_total")
        t_total = LANGEVIN_TOTAL_RELAXATIONS * tau
    if burn_in is None and tau is not None:
        burn_in = min(LANGEVIN_BURN_RELAXATIONS * tau, 0.5 * t_total)
    dump_every = (s.dump_every or DEFAULT_DUMP_EVERY) if cfg.trajectory_dump else None
    sim = langevin.SimConfig(t_total=t_total, dt=s.dt, burn_in=burn_in,
                             n_trajectories=s.trajectories, seed=point_seed(s.seed, index),
                             mode=s.tier, scheme=s.scheme, sample_every=s.sample_every,
                             dump_every=dump_every)
    ens = langevin.simulate(p, sim)
    row["n_langevin"], row["F_langevin"] = ens.n_mean, ens.fano
    row["n_langevin_err"], row["F_langevin_err"] = ens.n_err, ens.fano_err
    if cfg.trajectory_dump and ens.dumps:
        langevin.write_trajectory_dump(_suffixed(cfg.trajectory_dump, index, cfg.n_points),
                                       ens.dumps[0], len(p.drives))


def _qme(p, cfg: RunConfig, index, row):
    f = cfg.fock
    fock = qme.FockConfig(f.dim_mech, f.dim_cav, f.max_dim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditioningWarning)
        if f.converge:
            report = qme.convergence_sweep(p, fock, regularize=f.regularize,
                                           coherence_cutoff=f.coherence_cutoff)
            if not report.converged:
                row["n_qme"] = row["F_qme"] = UNCONVERGED
                row.failures.append(("qme", report.reason))
                return
            sol = report.solution
        else:
            sol = qme.solve(p, fock, regularize=f.regularize, coherence_cutoff=f.coherence_cutoff)
    row["n_qme"], row["F_qme"] = sol.n_mean, sol.fano
    if cfg.distribution_dump:
        qme.write_number_distribution(_suffixed(cfg.distribution_dump, index, cfg.n_points),
                                      sol.mech_populations)


def evaluate_point(cfg: RunConfig, index: int, pt: PointParams) -> ComparisonRow:
    """All requested tiers at one grid point; failures are recorded in-row."""
    p = pt.system()
    row = ComparisonRow()
    row["kappa"], row["delta1"] = float(pt.kappa1), float(pt.delta1)
    d2 = pt.resolved_delta2()
    row["delta2"] = None if d2 is None else float(d2)
    try:
        lc = semiclassical.find_limit_cycle(p)
    except NoLimitCycleError:
        lc = None
    row["limit_cycle"] = lc is not None
    row["valid_rwa"] = bool(lc.validity.condition_ok) if lc is not None else None

    def attempt(tier, columns, fn, needs_cycle):
        if tier not in cfg.tiers:
            return
        if needs_cycle and lc is None:
            for c in columns:
                row[c] = NO_LIMIT_CYCLE
            return
        try:
            fn()
        except (OptoKerrError, ValueError, ArithmeticError) as exc:
            for c in columns:
                row[c] = FAILED
            row.failures.append((tier, f"{type(exc).__name__}: {exc}"))

    attempt("analytic", ("B0", "n_analytic", "F_analytic"), lambda: _analytic(p, lc, row), True)
    attempt("fokker-planck", ("n_fp", "F_fp"), lambda: _fokker_planck(p, row), True)
    attempt("langevin", ("n_langevin", "F_langevin", "n_langevin_err", "F_langevin_err"),
            lambda: _langevin(p, lc, cfg, index, row), False)
    attempt("qme", ("n_qme", "F_qme"), lambda: _qme(p, cfg, index, row), False)
    if "analytic" not in cfg.tiers and row["B0"] is None and lc is not None:
        row["B0"] = float(lc.B0)

    # deviation against the most exact tier available, limit cycles only
    reference = next((row[c] for c in ("F_qme", "F_langevin", "F_fp") if _numeric(row[c])), None)
    if lc is not None and _numeric(row["F_analytic"]) and reference is not None:
        row["rel_dev_F"] = abs(reference - row["F_analytic"]) / abs(row["F_analytic"])
    return row


def _evaluate_indexed(args):
    cfg, index, pt = args
    return evaluate_point(cfg, index, pt)


def run_sweep(cfg: RunConfig, jobs: int | None = None) -> list[ComparisonRow]:
    """Rows in row-major grid order regardless of the worker count."""
    jobs = cfg.jobs if jobs is None else jobs
    work = [(cfg, i, pt) for i, pt in enumerate(cfg.points())]
    if jobs <= 1 or len(work) == 1:
        return [_evaluate_indexed(w) for w in work]
    with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
        return list(pool.map(_evaluate_indexed, work))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.{SIG_DIGITS}g}"
    return str(value)


def _json_cell(value):
    if isinstance(value, float):
        if not math.isfinite(value):
            return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
        return float(f"{value:.{SIG_DIGITS}g}")
    return value


def emit(rows, fmt: str = "csv") -> str:
    """Serialize rows; the column set never depends on which tiers ran."""
    if fmt == "csv":
        lines = [",".join(COLUMNS)]
        lines += [",".join(_format_cell(r.cells[c]) for c in COLUMNS) for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        data = [{c: _json_cell(r.cells[c]) for c in COLUMNS} for r in rows]
        return json.dumps(data, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
