"""Acceptance criteria, each at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""
import math
import warnings

import numpy as np
import pytest

from optokerr.errors import DegenerateStateWarning
from optokerr.langevin import SimConfig, ringdown_damping, simulate
from optokerr.model import Drive, SystemParams, gamma_opt
from optokerr.qme import FockConfig, convergence_sweep, solve
from optokerr.semiclassical import (
    b0_one_laser,
    b0_two_laser,
    closed_form_prediction,
    distribution_fano,
    fano_one_laser,
    fano_two_laser_general,
    find_limit_cycle,
    fp_steady_state,
)

pytestmark = pytest.mark.filterwarnings("ignore::optokerr.errors.ConditioningWarning")

KAPPAS = (0.03, 0.05, 0.08)


def two_laser_point(kappa, delta1=1.0):
    # K = g = 0.001, Gamma_m = 0, n_th = 0, second drive at -delta1 - 2 kappa
    return SystemParams.two_laser(delta1, kappa, g=0.001, kerr=0.001)


@pytest.fixture(scope="module")
def qme_points():
    return {k: solve(two_laser_point(k), FockConfig(60, 3), regularize=True) for k in KAPPAS}


def check_invariants(sol):
    return (sol.trace_residual < 1e-8 and sol.hermiticity_residual < 1e-10
            and sol.min_eigenvalue > -1e-8 and sol.liouvillian_residual < 1e-8)


@pytest.mark.slow
@pytest.mark.acceptance(1, "QME matches two-laser closed forms at dims 60/3/3")
def test_qme_matches_closed_forms(qme_points, detail):
    ok = True
    for kappa, sol in qme_points.items():
        pred = closed_form_prediction(two_laser_point(kappa))
        n_expected = pred.B0**2 - 0.5
        dev_f = abs(sol.fano - pred.fano) / pred.fano
        dev_n = abs(sol.n_mean - n_expected) / n_expected
        detail(f"kappa={kappa}: F_qme={sol.fano:.4f} F_closed={pred.fano:.4f} "
               f"(dev {dev_f:.2%}), n_qme={sol.n_mean:.3f} n_closed={n_expected:.3f} "
               f"(dev {dev_n:.2%}), tail={sol.tail_occupation:.2e}")
        ok &= dev_f < 0.15 and dev_n < 0.10
    # the largest point sits at the truncation edge; growing the space must not move it
    report = convergence_sweep(two_laser_point(0.08), FockConfig(60, 3), regularize=True)
    detail(f"kappa=0.08 convergence: {report.history}")
    assert report.converged
    assert ok


@pytest.mark.acceptance(2, "deterministic ring-down reproduces the optical damping")
def test_ringdown_damping(detail):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        kappa = rng.uniform(0.05, 0.2)
        g = kappa / rng.uniform(50, 200)
        delta = rng.choice([-1.0, 1.0]) * rng.uniform(0.7, 1.3)
        B = rng.uniform(1, 10)
        p = SystemParams(kerr=0.001, mech_decay=0.0, drives=(Drive(delta, g, kappa),))
        measured = ringdown_damping(p, B)
        expected = gamma_opt(p.drives[0], p, B)
        worst = max(worst, abs(measured / expected - 1))
    detail(f"20 tuples, kappa >= 50 g: worst relative deviation {worst:.2e}")
    assert worst < 0.05


@pytest.mark.acceptance(3, "Fokker-Planck Fano equals 4 sigma^2 for narrow limit cycles")
@pytest.mark.parametrize("delta1,kappa", [(1.0, 0.05), (1.2, 0.1), (1.0, 0.1), (1.1, 0.03)])
def test_fp_gaussian(delta1, kappa, detail):
    p = two_laser_point(kappa, delta1)
    lc = find_limit_cycle(p)
    assert math.sqrt(lc.sigma2) / lc.B0 < 0.1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateStateWarning)
        _, fano = distribution_fano(fp_steady_state(p))
    dev = abs(fano - 4 * lc.sigma2) / (4 * lc.sigma2)
    detail(f"delta1={delta1}, kappa={kappa}: F_fp={fano:.4f} 4sigma^2={4 * lc.sigma2:.4f} "
           f"(dev {dev:.2%})")
    assert dev < 0.10


@pytest.mark.slow
@pytest.mark.acceptance(4, "full-coupled Langevin ensemble reproduces semiclassical moments")
def test_langevin_ensemble(detail):
    p = SystemParams.two_laser(1.0, 0.05, delta2=-1.1)
    lc = find_limit_cycle(p)
    tau = 1.0 / lc.Gamma_L
    ens = simulate(p, SimConfig(t_total=5 * tau, dt=0.017, burn_in=tau, n_trajectories=200,
                                seed=7, mode="full"))
    b2_expected = lc.B0**2 + lc.sigma2
    dev_b2 = abs(ens.b2_mean - b2_expected) / b2_expected
    dev_f = abs(ens.fano - lc.fano) / lc.fano
    detail(f"<B^2>={ens.b2_mean:.4f}+-{ens.b2_err:.4f} vs {b2_expected:.4f} (dev {dev_b2:.2%})")
    detail(f"F={ens.fano:.4f}+-{ens.fano_err:.4f} vs {lc.fano:.4f} (dev {dev_f:.2%})")
    assert dev_b2 < 0.05
    assert dev_f < 0.15


@pytest.mark.acceptance(5, "closed-form limits and inverse-Kerr amplitude scaling")
def test_closed_form_limits(detail):
    g, kappa, coop = 0.001, 0.1, 1e9
    for nbar in (0.0, 1.0):
        p = SystemParams.one_laser(1.0, kappa, g=g, kerr=0.001,
                                   mech_decay=g**2 / (kappa * coop), bath_occupation=nbar)
        f = fano_one_laser(p)
        detail(f"C=1e9, n_th={nbar}: F={f:.9f}, limit {(nbar + 1) / 2}")
        assert abs(f - (nbar + 1) / 2) < 1e-6
    one = [b0_one_laser(SystemParams.one_laser(1.0, 0.1, kerr=k, mech_decay=1e-7)) ** 2
           for k in (1e-3, 2e-3)]
    detail(f"K-doubling B0^2 ratio, one laser: {one[1] / one[0]:.5f}")
    assert one[1] / one[0] == pytest.approx(0.5, rel=0.01)
    # the two-laser ratio is exactly (1 + 2K/Delta_-)/2, so the inverse-K law needs 2K << Delta_-
    for delta1, kappa, asserted in ((1.2, 0.1, True), (1.1, 0.1, True), (1.0, 0.05, False)):
        two = [b0_two_laser(SystemParams.two_laser(delta1, kappa, kerr=k)) ** 2
               for k in (1e-3, 2e-3)]
        ratio = two[1] / two[0]
        tag = "" if asserted else " (not asserted: 2K/Delta_- = 2%)"
        detail(f"K-doubling B0^2 ratio, two lasers delta1={delta1} kappa={kappa}: "
               f"{ratio:.5f}{tag}")
        if asserted:
            assert ratio == pytest.approx(0.5, rel=0.01)


@pytest.mark.acceptance(6, "QME sanity: detailed balance, residuals, optimal detuning")
def test_qme_sanity(qme_points, detail):
    for nbar, dim in ((0.5, 20), (2.0, 60)):
        p = SystemParams(kerr=0.001, mech_decay=0.01, bath_occupation=nbar,
                         drives=(Drive(1.0, 0.0, 0.1),))
        sol = solve(p, FockConfig(dim, 2))
        detail(f"thermal n_th={nbar}: n={sol.n_mean:.9f}, F={sol.fano:.9f}")
        assert abs(sol.n_mean - nbar) < 1e-6
        assert abs(sol.fano - (nbar + 1)) < 1e-6
        assert check_invariants(sol)
    for kappa, sol in qme_points.items():
        detail(f"kappa={kappa}: trace {sol.trace_residual:.1e}, herm "
               f"{sol.hermiticity_residual:.1e}, min eig {sol.min_eigenvalue:.1e}, "
               f"|L rho|/|L| {sol.liouvillian_residual:.1e}")
        assert check_invariants(sol)
    kappa, dminus = 0.1, 0.3
    grid = np.linspace(-1.0, -0.01, 991)
    best = grid[np.argmin(fano_two_laser_general(grid, dminus, kappa))]
    detail(f"grid minimum of F(Delta_+) at {best:.3f}, expected {-2 * kappa}")
    assert abs(best + 2 * kappa) <= grid[1] - grid[0]


@pytest.mark.slow
@pytest.mark.acceptance(7, "converged QME state with sub-Poissonian statistics")
def test_subpoissonian(detail):
    report = convergence_sweep(two_laser_point(0.05), FockConfig(60, 3), regularize=True)
    sol = report.solution
    detail(f"kappa=0.05: converged={report.converged}, F={sol.fano:.4f}, "
           f"tail={sol.tail_occupation:.2e}, history={report.history}")
    assert report.converged
    assert sol.fano < 1
    assert sol.tail_occupation < 1e-3
