"""Phonon-number statistics of a self-oscillating Kerr optomechanical resonator.

Tiers, from cheapest to most exact: closed forms and the numeric
linearization (:mod:`.semiclassical`), the radial Fokker-Planck density,
stochastic trajectories (:mod:`.langevin`) and the quantum master
equation (:mod:`.qme`).
"""
from .errors import *  # noqa: F401,F403
from .model import Drive, SystemParams

__all__ = ["Drive", "SystemParams"]
__version__ = "0.1.0"
