"""Stochastic trajectories of the cavity-mechanics Langevin equations.

Two tiers:

* ``full`` integrates the complex mechanical amplitude ``beta`` in the
  laboratory frame together with one cavity amplitude per drive, with
  the fast mechanical rotation resolved.
* ``reduced`` integrates only the radial amplitude ``B`` with the
  adiabatically eliminated drift and diffusion.

The linear rotating/decaying part of each complex amplitude is applied
exactly over a step.  Coupling forces enter through an exponential
Heun predictor-corrector by default (``scheme="heun"``), or a single
explicit increment (``scheme="euler"``); noise enters once per step.  Each trajectory draws from its own
counter-based Philox stream keyed by ``(seed, trajectory index)``, so
results do not depend on evaluation order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import (
    NoLimitCycleError,
    NonExponentialDecayError,
    SimulationInstabilityError,
    UnsupportedConfigurationError,
)
from .model import SystemParams, amplitude_frequency, mean_cavity_field, total_diffusion, total_drift
from .semiclassical import find_limit_cycle

MODES = {"full": "full", "full-coupled": "full", "reduced": "reduced", "reduced-radial": "reduced"}
N_BATCHES = 16


@dataclass(frozen=True)
class SimConfig:
    t_total: float
    dt: float = 0.01
    burn_in: float | None = None
    n_trajectories: int = 1
    seed: int = 0
    mode: str = "full"
    deterministic: bool = False
    initial_amplitude: float | None = None
    initial_spread: float | None = None
    sample_every: int = 1
    dump_every: int | None = None
    shared_cavity: bool = False
    scheme: str = "heun"

    def __post_init__(self):
        if self.scheme not in ("heun", "euler"):
            raise ValueError(f"scheme must be 'heun' or 'euler', got {self.scheme!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {sorted(MODES)}, got {self.mode!r}")
        object.__setattr__(self, "mode", MODES[self.mode])
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_total > 0:
            raise ValueError("t_total must be > 0")
        if self.burn_in is not None and not 0 <= self.burn_in < self.t_total:
            raise ValueError("burn_in must satisfy 0 <= burn_in < t_total")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")
        if self.dump_every is not None and self.dump_every < 1:
            raise ValueError("dump_every must be >= 1")


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Wigner-moment estimates over post-burn-in samples of all trajectories."""

    b2_mean: float
    b2_err: float
    b4_mean: float
    b4_err: float
    n_mean: float
    n_err: float
    fano: float
    fano_err: float
    n_trajectories: int
    samples_per_trajectory: int
    burn_in: float
    per_unit_b2: np.ndarray = field(repr=False)
    per_unit_b4: np.ndarray = field(repr=False)
    dumps: list = field(default_factory=list, repr=False)


def trajectory_generator(seed: int, index: int) -> np.random.Generator:
    """Philox stream for one trajectory; the index is mixed into the key."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


@numba.njit(nogil=True, cache=True)
def _phi(lam, dt):
    """``exp(z)``, ``dt (e^z - 1)/z`` and ``dt (e^z - 1 - z)/z^2`` with ``z = lam dt``."""
    z = lam * dt
    if abs(z) < 0.05:
        # Estrin-evaluated series (short dependency chain); error < 1e-18 for |z| < 0.05
        z2 = z * z
        z4 = z2 * z2
        c2 = ((1.0 / 2.0 + z * (1.0 / 6.0)) + z2 * (1.0 / 24.0 + z * (1.0 / 120.0))
              + z4 * ((1.0 / 720.0 + z * (1.0 / 5040.0))
                      + z2 * (1.0 / 40320.0 + z * (1.0 / 362880.0))))
        c1 = 1.0 + z * c2
        return 1.0 + z * c1, dt * c1, dt * c2
    e = np.exp(z)
    return e, (e - 1.0) / lam, (e - 1.0 - z) / (lam * z)


@numba.njit(nogil=True, cache=True)
def _full_kernel(rng, beta0, alpha0, n_steps, n_burn, dt, w_m, kerr, gamma_m, sig_b,
                 deltas, kappas, gs, sig_a, heun, sample_every, dump_every, dump, abort_at):
    nd = alpha0.shape[0]
    beta = beta0
    alpha = alpha0.copy()
    a_pred = alpha0.copy()
    xi_a = np.zeros(nd, dtype=np.complex128)
    e_cav = np.empty(nd, dtype=np.complex128)
    p1_cav = np.empty(nd, dtype=np.complex128)
    p2_cav = np.empty(nd, dtype=np.complex128)
    for d in range(nd):
        e_cav[d], p1_cav[d], p2_cav[d] = _phi(complex(-kappas[d], deltas[d]), dt)
    n_samp = (n_steps - n_burn) // sample_every
    s2 = np.zeros(N_BATCHES)
    s4 = np.zeros(N_BATCHES)
    cnt = np.zeros(N_BATCHES)
    k_samp = 0
    k_dump = 0
    for step in range(1, n_steps + 1):
        xi_b = 0j
        if sig_b > 0.0:
            xi_b = sig_b * complex(rng.standard_normal(), rng.standard_normal())
        for d in range(nd):
            if sig_a[d] > 0.0:
                xi_a[d] = sig_a[d] * complex(rng.standard_normal(), rng.standard_normal())
        # explicit (Euler) stage with the linear part integrated exactly
        force_b = 0j
        for d in range(nd):
            force_b += 2j * gs[d] * alpha[d].real
        b2 = beta.real * beta.real + beta.imag * beta.imag
        mu = complex(-gamma_m, -(w_m + kerr * (2.0 * b2 - 1.0)))
        e_b, p1_b, p2_b = _phi(mu, dt)
        b_pred = beta * e_b + p1_b * force_b + xi_b
        for d in range(nd):
            a_pred[d] = alpha[d] * e_cav[d] + p1_cav[d] * 2j * gs[d] * beta.real + xi_a[d]
        if heun:
            # exponential-Heun corrector: same noise, force and Kerr rate re-evaluated
            force_p = 0j
            for d in range(nd):
                force_p += 2j * gs[d] * a_pred[d].real
            bp2 = b_pred.real * b_pred.real + b_pred.imag * b_pred.imag
            mu = complex(-gamma_m, -(w_m + kerr * (b2 + bp2 - 1.0)))
            e_b, p1_b, p2_b = _phi(mu, dt)
            new_beta = beta * e_b + p1_b * force_b + p2_b * (force_p - force_b) + xi_b
            for d in range(nd):
                fa = 2j * gs[d] * beta.real
                fa_p = 2j * gs[d] * b_pred.real
                alpha[d] = (alpha[d] * e_cav[d] + p1_cav[d] * fa
                            + p2_cav[d] * (fa_p - fa) + xi_a[d])
            beta = new_beta
        else:
            beta = b_pred
            for d in range(nd):
                alpha[d] = a_pred[d]
        if step % 1024 == 0 and abs(beta) > abort_at:
            return s2, s4, cnt, k_dump, False
        if dump_every > 0 and step % dump_every == 0 and k_dump < dump.shape[0]:
            dump[k_dump, 0] = step * dt
            dump[k_dump, 1] = beta.real
            dump[k_dump, 2] = beta.imag
            for d in range(nd):
                dump[k_dump, 3 + 2 * d] = alpha[d].real
                dump[k_dump, 4 + 2 * d] = alpha[d].imag
            k_dump += 1
        if step > n_burn and (step - n_burn) % sample_every == 0:
            bb = beta.real * beta.real + beta.imag * beta.imag
            j = min(k_samp * N_BATCHES // max(n_samp, 1), N_BATCHES - 1)
            s2[j] += bb
            s4[j] += bb * bb
            cnt[j] += 1.0
            k_samp += 1
    return s2, s4, cnt, k_dump, True


def reduced_radial_step(B, p: SystemParams, dt: float, noise):
    """One Euler-Maruyama step of ``dB = A(B) dt + sqrt(D_B(B)) dW``.

    ``noise`` is the Wiener increment ``dW`` (variance ``dt``).  Negative
    results are reflected at ``B = 0``.
    """
    B = np.asarray(B, dtype=float)
    out = B + total_drift(p, B) * dt + np.sqrt(total_diffusion(p, B)) * noise
    out = np.abs(out)
    return float(out) if out.ndim == 0 else out


def _default_burn_in(p: SystemParams, lc) -> float:
    if lc is not None:
        return 20.0 / abs(lc.Gamma_L)
    scale = sum(d.coupling**2 / d.cavity_decay for d in p.drives) + p.mech_decay
    return 20.0 / scale if scale > 0 else 0.0


def _initial_state(p, cfg, lc, rng):
    amp = cfg.initial_amplitude
    if amp is None:
        amp = lc.B0 if lc is not None else 0.0
    spread = cfg.initial_spread
    if spread is None:
        spread = math.sqrt(lc.sigma2) if (lc is not None and not cfg.deterministic) else 0.0
    if cfg.deterministic:
        return complex(amp)
    B = abs(amp + spread * rng.standard_normal())
    return B * np.exp(-1j * rng.uniform(0, 2 * np.pi))


def _summarize(b2_units, b4_units, n_traj, samples, burn_in, dumps):
    units = len(b2_units)
    b2, b4 = float(np.mean(b2_units)), float(np.mean(b4_units))

    def number_stats(m2, m4):
        n = m2 - 0.5
        return n, (m4 - m2**2 - 0.25) / n

    n, fano = number_stats(b2, b4)
    if units >= 2:
        b2_err = float(np.std(b2_units, ddof=1) / math.sqrt(units))
        b4_err = float(np.std(b4_units, ddof=1) / math.sqrt(units))
        s2, s4 = b2_units.sum(), b4_units.sum()
        jack = np.array([number_stats((s2 - x2) / (units - 1), (s4 - x4) / (units - 1))
                         for x2, x4 in zip(b2_units, b4_units)])
        factor = math.sqrt((units - 1) / units)
        n_err = float(factor * math.sqrt(np.sum((jack[:, 0] - jack[:, 0].mean()) ** 2)))
        fano_err = float(factor * math.sqrt(np.sum((jack[:, 1] - jack[:, 1].mean()) ** 2)))
    else:
        b2_err = b4_err = n_err = fano_err = float("nan")
    return TrajectoryEnsemble(
        b2_mean=b2, b2_err=b2_err, b4_mean=b4, b4_err=b4_err, n_mean=float(n), n_err=n_err,
        fano=float(fano), fano_err=fano_err, n_trajectories=n_traj,
        samples_per_trajectory=samples, burn_in=burn_in,
        per_unit_b2=np.asarray(b2_units), per_unit_b4=np.asarray(b4_units), dumps=dumps)


def _semiclassical_or_none(p):
    try:
        return find_limit_cycle(p)
    except NoLimitCycleError:
        return None


def simulate(p: SystemParams, cfg: SimConfig) -> TrajectoryEnsemble:
    """Integrate ``cfg.n_trajectories`` trajectories and collect moments.

    Standard errors come from the spread of per-trajectory means when
    there are at least two trajectories, otherwise from batch means
    within the single trajectory.
    """
    if cfg.shared_cavity and len(p.drives) == 2:
        raise UnsupportedConfigurationError(
            "two tones in one cavity (beat-note terms) are not simulated; use separate cavities")
    lc = _semiclassical_or_none(p)
    burn_in = cfg.burn_in if cfg.burn_in is not None else _default_burn_in(p, lc)
    if burn_in >= cfg.t_total:
        raise ValueError(f"burn-in {burn_in:.4g} is not shorter than t_total {cfg.t_total:.4g}")
    n_steps = int(round(cfg.t_total / cfg.dt))
    n_burn = int(round(burn_in / cfg.dt))
    if cfg.mode == "full":
        return _simulate_full(p, cfg, lc, n_steps, n_burn, burn_in)
    return _simulate_reduced(p, cfg, lc, n_steps, n_burn, burn_in)


def _b_scale(p, lc, amp):
    """Largest amplitude a healthy trajectory is expected to visit."""
    ref = max(amp or 0.0, 3.0 * math.sqrt(p.bath_occupation + 1.0))
    if lc is not None:
        ref = max(ref, lc.B0 + 10.0 * math.sqrt(max(lc.sigma2, 0.0)))
    return ref


def _simulate_full(p, cfg, lc, n_steps, n_burn, burn_in):
    b_max = _b_scale(p, lc, cfg.initial_amplitude)
    fastest = max(amplitude_frequency(p, b_max), max(d.cavity_decay for d in p.drives))
    if cfg.dt > 0.02 / fastest:
        warnings.warn(f"dt = {cfg.dt} exceeds 0.02 / {fastest:.3g}; fast rotation under-resolved",
                      RuntimeWarning, stacklevel=3)
    deltas = np.array([d.detuning for d in p.drives])
    kappas = np.array([d.cavity_decay for d in p.drives])
    gs = np.array([d.coupling for d in p.drives])
    if cfg.deterministic:
        sig_a = np.zeros(len(p.drives))
        sig_b = 0.0
    else:
        sig_a = np.sqrt(kappas / 2 * cfg.dt)
        sig_b = math.sqrt(p.mech_decay * (2 * p.bath_occupation + 1) / 2 * cfg.dt)
    nd = len(p.drives)
    dump_every = cfg.dump_every or 0
    n_dump = n_steps // dump_every if dump_every else 0

    b2_units, b4_units, dumps = [], [], []
    samples = 0
    for i in range(cfg.n_trajectories):
        rng = trajectory_generator(cfg.seed, i)
        beta0 = _initial_state(p, cfg, lc, rng)
        alpha0 = np.array([mean_cavity_field(d, p, beta0) for d in p.drives], dtype=complex)
        dump = np.zeros((n_dump, 3 + 2 * nd))
        s2, s4, cnt, k_dump, ok = _full_kernel(
            rng, complex(beta0), alpha0, n_steps, n_burn, cfg.dt, p.mech_frequency, p.kerr,
            p.mech_decay, sig_b, deltas, kappas, gs, sig_a, cfg.scheme == "heun", cfg.sample_every, dump_every,
            dump, 10.0 * b_max)
        if not ok:
            raise SimulationInstabilityError(
                f"trajectory {i} exceeded |beta| = {10 * b_max:.3g}; reduce dt (now {cfg.dt})")
        if dump_every:
            dumps.append(dump[:k_dump])
        samples = int(cnt.sum())
        if cfg.n_trajectories == 1:
            keep = cnt > 0
            b2_units.extend(s2[keep] / cnt[keep])
            b4_units.extend(s4[keep] / cnt[keep])
        elif samples > 0:
            b2_units.append(s2.sum() / samples)
            b4_units.append(s4.sum() / samples)
    if samples == 0:
        raise ValueError("no post-burn-in samples; increase t_total")
    return _summarize(np.array(b2_units), np.array(b4_units), cfg.n_trajectories, samples,
                      burn_in, dumps)


def _simulate_reduced(p, cfg, lc, n_steps, n_burn, burn_in, block=4096):
    n = cfg.n_trajectories
    rngs = [trajectory_generator(cfg.seed, i) for i in range(n)]
    B = np.array([abs(_initial_state(p, cfg, lc, r)) for r in rngs])
    sqdt = math.sqrt(cfg.dt)
    n_samp = (n_steps - n_burn) // cfg.sample_every
    s2 = np.zeros((n, N_BATCHES))
    s4 = np.zeros((n, N_BATCHES))
    cnt = np.zeros(N_BATCHES)
    dump_every = cfg.dump_every or 0
    dumps = [[] for _ in range(n)] if dump_every else []
    k_samp = 0
    step = 0
    while step < n_steps:
        m = min(block, n_steps - step)
        if cfg.deterministic:
            noise = np.zeros((n, m))
        else:
            noise = np.stack([r.standard_normal(m) for r in rngs]) * sqdt
        for j in range(m):
            B = reduced_radial_step(B, p, cfg.dt, noise[:, j])
            step += 1
            if dump_every and step % dump_every == 0:
                for i in range(n):
                    dumps[i].append((step * cfg.dt, B[i], 0.0))
            if step > n_burn and (step - n_burn) % cfg.sample_every == 0:
                b = min(k_samp * N_BATCHES // max(n_samp, 1), N_BATCHES - 1)
                b2 = B * B
                s2[:, b] += b2
                s4[:, b] += b2 * b2
                cnt[b] += 1
                k_samp += 1
    if k_samp == 0:
        raise ValueError("no post-burn-in samples; increase t_total")
    if n == 1:
        keep = cnt > 0
        b2_units, b4_units = s2[0, keep] / cnt[keep], s4[0, keep] / cnt[keep]
    else:
        b2_units, b4_units = s2.sum(axis=1) / k_samp, s4.sum(axis=1) / k_samp
    dumps = [np.array(d) for d in dumps]
    return _summarize(b2_units, b4_units, n, k_samp, burn_in, dumps)


def stationary_samples(p: SystemParams, cfg: SimConfig, stride: int) -> np.ndarray:
    """Post-burn-in radial samples (reduced tier), thinned by ``stride`` steps."""
    if cfg.mode != "reduced":
        raise ValueError("stationary_samples runs the reduced tier only")
    lc = _semiclassical_or_none(p)
    burn_in = cfg.burn_in if cfg.burn_in is not None else _default_burn_in(p, lc)
    n_steps = int(round(cfg.t_total / cfg.dt))
    n_burn = int(round(burn_in / cfg.dt))
    rngs = [trajectory_generator(cfg.seed, i) for i in range(cfg.n_trajectories)]
    B = np.array([abs(_initial_state(p, cfg, lc, r)) for r in rngs])
    sqdt = math.sqrt(cfg.dt)
    out = []
    for step in range(1, n_steps + 1):
        if (step - 1) % 4096 == 0:
            m = min(4096, n_steps - step + 1)
            noise = np.stack([r.standard_normal(m) for r in rngs]) * sqdt
        B = reduced_radial_step(B, p, cfg.dt, noise[:, (step - 1) % 4096])
        if step > n_burn and (step - n_burn) % stride == 0:
            out.append(B.copy())
    return np.concatenate(out) if out else np.empty(0)


def write_trajectory_dump(path, rows: np.ndarray, n_drives: int | None = None) -> None:
    """Space-separated table ``t re_beta im_beta [re_alpha1 im_alpha1 ...]``."""
    rows = np.asarray(rows, dtype=float)
    if n_drives is None:
        n_drives = (rows.shape[1] - 3) // 2
    cols = ["t", "re_beta", "im_beta"]
    for d in range(1, n_drives + 1):
        cols += [f"re_alpha{d}", f"im_alpha{d}"]
    np.savetxt(path, rows[:, :len(cols)], fmt="%.12e", header=" ".join(cols), comments="# ")


def ringdown_damping(p: SystemParams, B_probe: float, cfg: SimConfig | None = None,
                     residual_tol: float = 0.05) -> float:
    """Measure the optical damping at ``B_probe`` from a noiseless ring-down.

    The cavities start at their adiabatic amplitudes; after ``burn_in``
    (settling, default ``10 / kappa``) ``ln|beta|`` is fit by a straight
    line up to ``t_total``.  Returns ``-slope - Gamma_m``.
    """
    kappa_min = min(d.cavity_decay for d in p.drives)
    if cfg is None:
        settle = 10.0 / kappa_min
        scale = sum(d.coupling**2 / d.cavity_decay for d in p.drives)
        window = min(2e-3 / scale, 2e4) if scale > 0 else 100.0
        cfg = SimConfig(t_total=settle + window, burn_in=settle, dt=0.01, deterministic=True)
    if not cfg.deterministic or cfg.mode != "full":
        raise ValueError("ring-down needs a deterministic full-coupled configuration")
    settle = cfg.burn_in if cfg.burn_in is not None else 10.0 / kappa_min
    n_steps = int(round(cfg.t_total / cfg.dt))
    n_settle = int(round(settle / cfg.dt))
    stride = max(1, (n_steps - n_settle) // 20000)
    ring_cfg = SimConfig(t_total=cfg.t_total, dt=cfg.dt, burn_in=0.0, deterministic=True,
                         initial_amplitude=B_probe, dump_every=stride, scheme=cfg.scheme)
    rows = _ringdown_run(p, ring_cfg, n_steps)
    t, re, im = rows[:, 0], rows[:, 1], rows[:, 2]
    sel = t >= settle
    t, y = t[sel], np.log(np.hypot(re[sel], im[sel]))
    if t.size < 10:
        raise ValueError("fit window too short")
    slope, icpt = np.polyfit(t - t[0], y, 1)
    resid = y - (slope * (t - t[0]) + icpt)
    rms = float(np.sqrt(np.mean(resid**2)))
    change = abs(slope) * (t[-1] - t[0])
    if rms > max(residual_tol * change, 1e-9):
        raise NonExponentialDecayError(
            f"ln|beta| residual {rms:.3g} vs change {change:.3g} over the fit window")
    return float(-slope - p.mech_decay)


def _ringdown_run(p, cfg, n_steps):
    deltas = np.array([d.detuning for d in p.drives])
    kappas = np.array([d.cavity_decay for d in p.drives])
    gs = np.array([d.coupling for d in p.drives])
    beta0 = complex(cfg.initial_amplitude)
    alpha0 = np.array([mean_cavity_field(d, p, beta0) for d in p.drives], dtype=complex)
    dump = np.zeros((n_steps // cfg.dump_every, 3 + 2 * len(p.drives)))
    _, _, _, k_dump, ok = _full_kernel(
        np.random.Generator(np.random.Philox(0)), beta0, alpha0, n_steps, n_steps, cfg.dt,
        p.mech_frequency, p.kerr, p.mech_decay, 0.0, deltas, kappas, gs,
        np.zeros(len(p.drives)), cfg.scheme == "heun", 1, cfg.dump_every, dump, 1e6 * max(abs(beta0), 1.0))
    if not ok:
        raise SimulationInstabilityError("ring-down trajectory diverged; reduce dt")
    return dump[:k_dump]
