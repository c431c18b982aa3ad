"""Steady-state amplitude predictions from the adiabatically eliminated model.

Two routes are offered: closed-form expressions (valid with the
non-resonant Lorentzians dropped) and a numeric treatment of the full
radial drift/diffusion (root finding plus quadrature of the stationary
Fokker-Planck density).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DegenerateStateError,
    DegenerateStateWarning,
    DivergenceError,
    DomainError,
    InfiniteCooperativityError,
    NoLimitCycleError,
    SingularIntegrandError,
)
from .model import Drive, SystemParams, total_diffusion, total_drift, total_gamma_opt

RWA_THRESHOLD = 0.1


@dataclass(frozen=True)
class RwaReport:
    kerr_ratio: float
    condition_ok: bool
    detail: dict = field(default_factory=dict)
    threshold: float = RWA_THRESHOLD


@dataclass(frozen=True)
class LimitCyclePrediction:
    """Gaussian summary of the amplitude distribution around the attractor."""

    B0: float
    Gamma_L: float
    sigma2: float
    n_mean: float
    fano: float
    stable: bool = True
    validity: RwaReport | None = None
    multistable: bool = False


@dataclass(frozen=True)
class AmplitudeDistribution:
    grid: np.ndarray
    density: np.ndarray
    normalization_residual: float

    def moment(self, k: int) -> float:
        return float(integrate.trapezoid(self.grid**k * self.density, self.grid))

    @property
    def peak(self) -> float:
        return float(self.grid[np.argmax(self.density)])


# -- closed forms -----------------------------------------------------------

def cooperativity(d: Drive, p: SystemParams) -> float:
    """``g^2 / (kappa Gamma_m)``."""
    if p.mech_decay == 0:
        raise InfiniteCooperativityError("cooperativity is infinite for mech_decay = 0")
    return d.coupling**2 / (d.cavity_decay * p.mech_decay)


def _single_drive(p: SystemParams) -> Drive:
    if len(p.drives) != 1:
        raise DomainError(f"expected exactly one drive, got {len(p.drives)}")
    return p.drives[0]


def _blue_red(p: SystemParams) -> tuple[Drive, Drive]:
    if len(p.drives) != 2:
        raise DomainError(f"expected two drives, got {len(p.drives)}")
    blue, red = sorted(p.drives, key=lambda d: -d.detuning)
    if not blue.detuning > 0 > red.detuning:
        raise NoLimitCycleError(
            f"need one blue and one red drive, got detunings {blue.detuning}, {red.detuning}")
    return blue, red


def b0_one_laser(p: SystemParams) -> float:
    d = _single_drive(p)
    if p.kerr == 0:
        raise NoLimitCycleError("closed form needs kerr > 0")
    try:
        C = cooperativity(d, p)
    except InfiniteCooperativityError as exc:
        raise NoLimitCycleError("amplitude unbounded without mechanical damping") from exc
    # C = 1 up to rounding counts as threshold
    if C < 1 - 1e-12:
        raise NoLimitCycleError(f"below threshold: cooperativity {C:.4g} < 1")
    w, K, k = p.mech_frequency, p.kerr, d.cavity_decay
    radicand = d.detuning - w + K + k * math.sqrt(max(C - 1, 0.0))
    if radicand <= 0:
        raise NoLimitCycleError(f"detuning {d.detuning} too small for a limit cycle")
    return math.sqrt(radicand / (2 * K))


def _two_laser_coordinates(p: SystemParams):
    blue, red = _blue_red(p)
    delta_plus = blue.detuning + red.detuning
    delta_minus = blue.detuning - red.detuning - 2 * p.mech_frequency + 2 * p.kerr
    return blue, red, delta_plus, delta_minus


def b0_two_laser(p: SystemParams) -> float:
    blue, red, _, delta_minus = _two_laser_coordinates(p)
    if p.kerr == 0:
        raise NoLimitCycleError("closed form needs kerr > 0")
    if delta_minus <= 0:
        raise NoLimitCycleError(f"Delta_- = {delta_minus:.4g} <= 0")
    if not abs(blue.detuning) < abs(red.detuning):
        raise NoLimitCycleError("attractor unstable: need |Delta_1| < |Delta_2|")
    return 0.5 * math.sqrt(delta_minus / p.kerr)


def optimal_second_detuning(delta1: float, kappa: float) -> float:
    """Red detuning minimizing the two-laser Fano factor."""
    if not delta1 > 0:
        raise ValueError(f"delta1 must be positive, got {delta1}")
    return -delta1 - 2 * kappa


def fano_one_laser(p: SystemParams) -> float:
    d = _single_drive(p)
    nbar = p.bath_occupation
    try:
        C = cooperativity(d, p)
    except InfiniteCooperativityError:
        return (nbar + 1) / 2
    if C <= 1:
        raise DomainError(f"cooperativity {C:.4g} <= 1")
    x = (d.detuning - p.mech_frequency + p.kerr) / d.cavity_decay
    bracket = 1 - 1 / C + x * math.sqrt(1 / C - 1 / C**2)
    if bracket <= 0:
        raise DomainError("no positive-variance solution for these detunings")
    return (nbar + 1) / 2 / bracket


def fano_two_laser_general(delta_plus, delta_minus, kappa):
    """``-(Delta_+^2 + 4 kappa^2) / (4 Delta_+ Delta_-)``; broadcasts over arrays."""
    delta_plus = np.asarray(delta_plus, dtype=float)
    out = -0.25 * (delta_plus**2 + 4 * kappa**2) / (delta_plus * delta_minus)
    return float(out) if out.ndim == 0 else out


def fano_two_laser(p: SystemParams) -> float:
    blue, red, delta_plus, delta_minus = _two_laser_coordinates(p)
    if not math.isclose(blue.cavity_decay, red.cavity_decay, rel_tol=1e-12):
        raise DomainError("closed form assumes identical kappa in both cavities")
    if delta_minus <= 0:
        raise NoLimitCycleError(f"Delta_- = {delta_minus:.4g} <= 0")
    if delta_plus >= 0:
        raise DomainError(f"Delta_+ = {delta_plus:.4g} must be negative")
    return fano_two_laser_general(delta_plus, delta_minus, blue.cavity_decay)


# -- numeric limit cycle ----------------------------------------------------

def _b_max(p: SystemParams) -> float:
    # beyond this the Kerr shift has carried w(B) past every drive resonance
    dmax = max(abs(d.detuning) for d in p.drives)
    return 1.5 * math.sqrt(2 * (dmax + p.mech_frequency) / p.kerr)


def _net_rate(p, resonant_only, shift_frequency):
    def h(B):
        return -(p.mech_decay + total_gamma_opt(p, B, resonant_only, shift_frequency))
    return h


def _derivative(f, x, h):
    def central(step):
        return (f(x + step) - f(x - step)) / (2 * step)
    coarse, fine = central(h), central(h / 2)
    return (4 * fine - coarse) / 3


def linearized_damping(p: SystemParams, B0: float, resonant_only: bool = False,
                       shift_frequency: bool = False) -> float:
    """``B0 * dGamma_opt/dB`` at ``B0`` by Richardson-extrapolated differences."""
    h = max(1e-4, 1e-4 * B0)
    h = min(h, 0.5 * B0)
    slope = _derivative(lambda b: total_gamma_opt(p, b, resonant_only, shift_frequency), B0, h)
    return B0 * slope


def find_limit_cycle(p: SystemParams, resonant_only: bool = False,
                     shift_frequency: bool = False, n_grid: int = 4000,
                     rwa_threshold: float = RWA_THRESHOLD) -> LimitCyclePrediction:
    """Locate the stable zero of the radial drift and linearize around it.

    Raises
    ------
    NoLimitCycleError
        If the drift has no stable positive root.
    """
    h = _net_rate(p, resonant_only, shift_frequency)
    if p.kerr == 0:
        raise NoLimitCycleError("damping is amplitude independent for kerr = 0")
    b_lo, b_hi = 1e-3, _b_max(p)
    grid = np.geomspace(b_lo, b_hi, n_grid)
    vals = h(grid)
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0):
        a, b = grid[i], grid[i + 1]
        if vals[i] == 0:
            r = a
        elif vals[i + 1] == 0:
            continue
        else:
            r = optimize.brentq(h, a, b, xtol=1e-14, rtol=1e-12)
        stable = vals[i] > 0 and vals[i + 1] <= 0 or (vals[i] == 0 and vals[i + 1] < 0)
        roots.append((r, stable))
    stable_roots = [r for r, s in roots if s]
    if not stable_roots:
        raise NoLimitCycleError("radial drift has no stable positive root")

    def basin(r):
        lower = max([x for x, s in roots if not s and x < r], default=0.0)
        upper = min([x for x, s in roots if not s and x > r], default=math.inf)
        return upper - lower

    origin_stable = vals[0] < 0
    B0 = max(stable_roots, key=basin)
    multistable = bool(len(stable_roots) > 1 or origin_stable)

    gamma_l = linearized_damping(p, B0, resonant_only, shift_frequency)
    if not gamma_l > 0:
        raise NoLimitCycleError(f"non-positive linearized damping {gamma_l:.3g} at B0={B0:.4g}")
    sigma2 = total_diffusion(p, B0, resonant_only, shift_frequency) / (2 * gamma_l)
    lc = LimitCyclePrediction(
        B0=float(B0), Gamma_L=float(gamma_l), sigma2=float(sigma2),
        n_mean=float(B0**2 + sigma2 - 0.5), fano=float(4 * sigma2),
        stable=True, multistable=multistable)
    return replace(lc, validity=rwa_validity(p, lc, rwa_threshold))


def closed_form_prediction(p: SystemParams,
                           rwa_threshold: float = RWA_THRESHOLD) -> LimitCyclePrediction:
    """Limit-cycle summary from the closed-form amplitude and Fano expressions.

    ``n_mean`` is ``B0^2 - 1/2`` here, matching how the closed forms are
    compared against exact number statistics.
    """
    if len(p.drives) == 1:
        B0, F = b0_one_laser(p), fano_one_laser(p)
    else:
        B0, F = b0_two_laser(p), fano_two_laser(p)
    gamma_l = linearized_damping(p, B0, resonant_only=True)
    lc = LimitCyclePrediction(B0=B0, Gamma_L=float(gamma_l), sigma2=F / 4,
                              n_mean=B0**2 - 0.5, fano=F, stable=True)
    return replace(lc, validity=rwa_validity(p, lc, rwa_threshold))


# -- Fokker-Planck steady state ---------------------------------------------

def _grid_extent(p, resonant_only, shift_frequency):
    try:
        lc = find_limit_cycle(p, resonant_only, shift_frequency)
        return lc.B0 + 12 * math.sqrt(lc.sigma2)
    except NoLimitCycleError:
        pass
    d0 = total_diffusion(p, 0.0, resonant_only, shift_frequency)
    if d0 <= 0:
        raise SingularIntegrandError("amplitude diffusion vanishes at B = 0")
    rate0 = p.mech_decay + total_gamma_opt(p, 0.0, resonant_only, shift_frequency)
    if rate0 <= 0:
        raise DivergenceError("origin is unstable and no attractor exists: density unnormalizable")
    return 12 * math.sqrt(d0 / (2 * rate0))


def fp_steady_state(p: SystemParams, n_points: int = 2000, b_max: float | None = None,
                    resonant_only: bool = False,
                    shift_frequency: bool = False) -> AmplitudeDistribution:
    """Stationary amplitude density ``N / D exp(2 int_0^B A/D)`` on a uniform grid.

    The grid spans ``[0, B0 + 12 sigma]`` unless ``b_max`` is given; it is
    widened automatically while the density at the upper edge is not
    negligible.
    """
    if b_max is None:
        b_max = _grid_extent(p, resonant_only, shift_frequency)
    for _ in range(6):
        grid = np.linspace(0.0, b_max, n_points)
        diff = total_diffusion(p, grid, resonant_only, shift_frequency)
        if np.any(diff <= 0):
            raise SingularIntegrandError(
                f"amplitude diffusion vanishes on the grid (min {diff.min():.3g})")
        drift = total_drift(p, grid, resonant_only, shift_frequency)
        exponent = 2 * integrate.cumulative_trapezoid(drift / diff, grid, initial=0.0)
        log_w = exponent - np.log(diff)
        w = np.exp(log_w - log_w.max())
        if w[-1] < 1e-14:
            break
        if drift[-1] > 0:
            raise DivergenceError("drift is outward at the grid edge: density unnormalizable")
        b_max *= 1.5
    else:
        raise DivergenceError("density does not decay within the widened grid")
    z_trap = integrate.trapezoid(w, grid)
    z_simp = integrate.simpson(w, x=grid)
    return AmplitudeDistribution(grid=grid, density=w / z_trap,
                                 normalization_residual=float(abs(z_trap - z_simp) / z_trap))


def distribution_fano(dist: AmplitudeDistribution) -> tuple[float, float]:
    """Mean phonon number and Fano factor from symmetrically ordered moments."""
    b2, b4 = dist.moment(2), dist.moment(4)
    n = b2 - 0.5
    if n <= 0:
        raise DegenerateStateError(f"<n> = {n:.3g} <= 0 from <B^2> = {b2:.3g}")
    if n < 1 or np.argmax(dist.density) == 0:
        warnings.warn(f"small-amplitude state (<n> = {n:.3g}): Wigner-moment Fano "
                      "factor is not reliable", DegenerateStateWarning, stacklevel=2)
    n2 = b4 - n - 0.5
    return float(n), float((n2 - n**2) / n)


# -- validity ---------------------------------------------------------------

def rwa_validity(p: SystemParams, lc: LimitCyclePrediction,
                 threshold: float = RWA_THRESHOLD) -> RwaReport:
    """Check the rotating-wave conditions behind the Kerr model.

    Tracked ratios (each must stay below ``threshold``): ``K / w_m``,
    ``2 K <n> / w_m`` and the setup-specific steady-state detuning offset.
    """
    w = p.mech_frequency
    detail = {"kerr": p.kerr / w, "kerr_occupation": 2 * p.kerr * max(lc.n_mean, 0.0) / w}
    if len(p.drives) == 1:
        d = p.drives[0]
        if p.mech_decay > 0:
            C = cooperativity(d, p)
            if C >= 1:
                detail["detuning_offset"] = abs(
                    d.detuning - w + p.kerr + d.cavity_decay * math.sqrt(C - 1)) / w
    else:
        blue = max(p.drives, key=lambda d: d.detuning)
        detail["detuning_offset"] = abs(blue.detuning - w + p.kerr + blue.cavity_decay) / w
    ok = all(v < threshold for v in detail.values())
    return RwaReport(kerr_ratio=detail["kerr_occupation"], condition_ok=ok,
                     detail=detail, threshold=threshold)
