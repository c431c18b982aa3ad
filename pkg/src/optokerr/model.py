"""Physical parameters and the adiabatic-elimination building blocks.

All rates are in units of the bare mechanical frequency, which is kept
at 1 by default.  Every amplitude argument ``B`` may be a float or a
numpy array; results broadcast accordingly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class Drive:
    """One laser tone driving its own cavity.

    Parameters
    ----------
    detuning : float
        Laser minus cavity frequency.  Positive is blue (anti-damping).
    coupling : float
        Linearized optomechanical coupling ``g``.
    cavity_decay : float
        Cavity amplitude decay rate ``kappa``.
    """

    detuning: float
    coupling: float
    cavity_decay: float

    def __post_init__(self):
        if not math.isfinite(self.detuning):
            raise ValueError(f"detuning must be finite, got {self.detuning}")
        # g = 0 is accepted so that thermal (uncoupled) limits are expressible
        if not (self.coupling >= 0 and math.isfinite(self.coupling)):
            raise ValueError(f"coupling must be >= 0, got {self.coupling}")
        if not (self.cavity_decay > 0 and math.isfinite(self.cavity_decay)):
            raise ValueError(f"cavity_decay must be > 0, got {self.cavity_decay}")

    @property
    def is_blue(self) -> bool:
        return self.detuning >= 0


@dataclass(frozen=True)
class SystemParams:
    kerr: float
    mech_decay: float
    drives: tuple[Drive, ...]
    bath_occupation: float = 0.0
    mech_frequency: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "drives", tuple(self.drives))
        if not self.mech_frequency > 0:
            raise ValueError("mech_frequency must be > 0")
        if not self.kerr >= 0:
            raise ValueError(f"kerr must be >= 0, got {self.kerr}")
        if not self.mech_decay >= 0:
            raise ValueError(f"mech_decay must be >= 0, got {self.mech_decay}")
        if not self.bath_occupation >= 0:
            raise ValueError(f"bath_occupation must be >= 0, got {self.bath_occupation}")
        if not 1 <= len(self.drives) <= 2:
            raise ValueError(f"need one or two drives, got {len(self.drives)}")
        for d in self.drives:
            if not isinstance(d, Drive):
                raise TypeError(f"drives must be Drive instances, got {type(d).__name__}")

    @classmethod
    def two_laser(cls, delta1, kappa, g=0.001, kerr=0.001, mech_decay=0.0,
                  bath_occupation=0.0, delta2=None):
        """Two separate cavities with identical g and kappa.

        ``delta2`` defaults to the Fano-optimal value ``-delta1 - 2 kappa``.
        """
        if delta2 is None:
            delta2 = -delta1 - 2.0 * kappa
        return cls(kerr=kerr, mech_decay=mech_decay, bath_occupation=bath_occupation,
                   drives=(Drive(delta1, g, kappa), Drive(delta2, g, kappa)))

    @classmethod
    def one_laser(cls, delta, kappa, g=0.001, kerr=0.001, mech_decay=1e-7,
                  bath_occupation=0.0):
        return cls(kerr=kerr, mech_decay=mech_decay, bath_occupation=bath_occupation,
                   drives=(Drive(delta, g, kappa),))


@dataclass(frozen=True)
class RateCurve:
    """A rate tabulated against oscillation amplitude."""

    amplitude_grid: np.ndarray
    values: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        grid = np.asarray(self.amplitude_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or vals.shape != grid.shape:
            raise ValueError("amplitude_grid and values must be 1-D and equal length")
        if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("amplitude_grid must be non-negative and strictly increasing")
        object.__setattr__(self, "amplitude_grid", grid)
        object.__setattr__(self, "values", vals)


def rate_curve(fn: Callable[[np.ndarray], np.ndarray], grid: Sequence[float],
               label: str = "") -> RateCurve:
    grid = np.asarray(grid, dtype=float)
    return RateCurve(grid, np.broadcast_to(fn(grid), grid.shape).copy(), label)


def amplitude_frequency(p: SystemParams, B):
    """Oscillation frequency at amplitude ``B``: ``w_m + 2 K B^2 - K``."""
    B = np.asarray(B, dtype=float)
    if np.any(B < 0):
        raise ValueError("amplitude must be non-negative")
    out = p.mech_frequency + 2.0 * p.kerr * B**2 - p.kerr
    return float(out) if out.ndim == 0 else out


def _lorentzians(d: Drive, w):
    """Red-shifted and blue-shifted cavity Lorentzians at mechanical frequency w."""
    k = d.cavity_decay
    anti = k / ((d.detuning + w) ** 2 + k**2)
    res = k / ((d.detuning - w) ** 2 + k**2)
    return anti, res


def _keep(d: Drive, resonant_only: bool):
    # which Lorentzian survives when the non-resonant one is dropped
    if not resonant_only:
        return 1.0, 1.0
    return (0.0, 1.0) if d.is_blue else (1.0, 0.0)


def gamma_opt(d: Drive, p: SystemParams, B, resonant_only: bool = False, w=None):
    """Optically induced amplitude damping rate.

    With ``resonant_only`` the Lorentzian far from the laser is dropped:
    for a blue drive only ``-g^2 kappa / ((w(B) - Delta)^2 + kappa^2)``
    remains, for a red drive only the ``(Delta + w(B))`` term.
    ``w`` overrides the amplitude-dependent frequency.
    """
    w = amplitude_frequency(p, B) if w is None else w
    anti, res = _lorentzians(d, w)
    ka, kr = _keep(d, resonant_only)
    return d.coupling**2 * (ka * anti - kr * res)


def delta_omega(d: Drive, p: SystemParams, B, w=None):
    """Optically induced mechanical frequency shift."""
    w = amplitude_frequency(p, B) if w is None else w
    k = d.cavity_decay
    plus = (w + d.detuning) / ((d.detuning + w) ** 2 + k**2)
    minus = (d.detuning - w) / ((d.detuning - w) ** 2 + k**2)
    return d.coupling**2 * (plus + minus)


def d_opt(d: Drive, p: SystemParams, B, resonant_only: bool = False, w=None):
    """Optically induced amplitude diffusion (sum of the two Lorentzians)."""
    w = amplitude_frequency(p, B) if w is None else w
    anti, res = _lorentzians(d, w)
    ka, kr = _keep(d, resonant_only)
    return d.coupling**2 * (ka * anti + kr * res)


def effective_frequency(p: SystemParams, B, shift_frequency: bool = False):
    """``w_m(B)``, optionally renormalized by the summed optical shift."""
    w = amplitude_frequency(p, B)
    if shift_frequency:
        w = w + sum(delta_omega(d, p, B) for d in p.drives)
    return w


def total_gamma_opt(p: SystemParams, B, resonant_only: bool = False,
                    shift_frequency: bool = False):
    w = effective_frequency(p, B, shift_frequency)
    return sum(gamma_opt(d, p, B, resonant_only, w=w) for d in p.drives)


def total_drift(p: SystemParams, B, resonant_only: bool = False,
                shift_frequency: bool = False):
    """Radial drift ``-(Gamma_m + sum Gamma_opt) B``."""
    B = np.asarray(B, dtype=float)
    g = total_gamma_opt(p, B, resonant_only, shift_frequency)
    out = -(p.mech_decay + g) * B
    return float(out) if np.ndim(out) == 0 else out


def total_diffusion(p: SystemParams, B, resonant_only: bool = False,
                    shift_frequency: bool = False):
    """Amplitude diffusion ``(D_m + sum D_opt) / 2`` with ``D_m = Gamma_m (2 n + 1)``."""
    w = effective_frequency(p, B, shift_frequency)
    dm = p.mech_decay * (2.0 * p.bath_occupation + 1.0)
    out = 0.5 * (dm + sum(d_opt(d, p, B, resonant_only, w=w) for d in p.drives))
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def mean_cavity_field(d: Drive, p: SystemParams, beta):
    """Adiabatic cavity amplitude slaved to the mechanical amplitude ``beta``."""
    beta = np.asarray(beta, dtype=complex)
    w = amplitude_frequency(p, np.abs(beta))
    k, D = d.cavity_decay, d.detuning
    out = 1j * d.coupling * (beta / (-1j * w - 1j * D + k)
                             + np.conj(beta) / (1j * w - 1j * D + k))
    return complex(out) if out.ndim == 0 else out


def kerr_from_duffing(duffing: float) -> float:
    """Kerr coefficient of the rotating-wave reduced quartic potential."""
    return 6.0 * duffing
