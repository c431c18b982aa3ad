"""Steady state of the Lindblad master equation on a truncated Fock space.

Conventions
-----------
* Operator ordering is mechanics (x) cavity 1 (x) cavity 2.
* Density matrices are vectorized column-stacked: ``vec(rho)[i + N j] = rho[i, j]``,
  so ``vec(A rho B) = (B^T (x) A) vec(rho)``.
* Decay constants are amplitude rates.  A dissipator with rate ``r`` and
  jump operator ``c`` reads ``r (2 c rho c^+ - c^+ c rho - rho c^+ c)``,
  i.e. the energy decays at ``RATE_FACTOR * r``.

Solver
------
Every term of the generator changes the "charge" ``q = m + sum_d s_d c_d``
(``m`` phonons, ``c_d`` photons, ``s_d = -1`` for a blue drive and ``+1``
for a red one) by 0 or +-2, and the dissipators leave the coherence order
``k = q_row - q_col`` unchanged.  The steady state therefore lives on even
``k``, and because the counter-rotating couplings are weak, orders beyond
a small cutoff carry negligible weight.  Dropping them and ordering the
unknowns by total charge makes the linear system banded enough for a
direct sparse factorization at the few-hundred-dimension scale.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConditioningWarning,
    ConvergenceError,
    DegenerateSteadyStateError,
    DimensionBudgetError,
)
from .model import SystemParams

RATE_FACTOR = 2.0
REGULARIZING_DECAY = 1e-8
DEFAULT_DIM_BUDGET = 2000
DIRECT_SOLVE_LIMIT = 2000
DEGENERATE_OCCUPATION = 1e-6


@dataclass(frozen=True)
class FockConfig:
    """Fock-space truncation.

    Parameters
    ----------
    dim_mech : int
        Mechanical levels kept (``0 .. dim_mech-1`` phonons).
    dim_cav : int
        Levels kept per cavity.
    max_dim : int
        Upper bound on the composite Hilbert-space dimension.
    """

    dim_mech: int = 60
    dim_cav: int = 3
    max_dim: int = DEFAULT_DIM_BUDGET

    def __post_init__(self):
        if self.dim_mech < 2:
            raise ValueError(f"dim_mech must be >= 2, got {self.dim_mech}")
        if self.dim_cav < 2:
            raise ValueError(f"dim_cav must be >= 2, got {self.dim_cav}")
        if self.max_dim < 4:
            raise ValueError("max_dim must be >= 4")

    def dims(self, n_drives: int) -> tuple[int, ...]:
        return (self.dim_mech,) + (self.dim_cav,) * n_drives

    def total_dim(self, n_drives: int) -> int:
        return self.dim_mech * self.dim_cav**n_drives

    def check_budget(self, n_drives: int) -> None:
        total = self.total_dim(n_drives)
        if total > self.max_dim:
            raise DimensionBudgetError(
                f"composite dimension {total} exceeds budget {self.max_dim}")


@dataclass(frozen=True)
class Liouvillian:
    """Sparse generator acting on column-stacked density matrices."""

    matrix: sp.csr_matrix
    dims: tuple[int, ...]
    charges: np.ndarray

    @property
    def hilbert_dim(self) -> int:
        return int(np.prod(self.dims))

    def __matmul__(self, vec):
        return self.matrix @ vec


@dataclass(frozen=True)
class SteadyStateSolution:
    rho: np.ndarray = field(repr=False)
    dims: tuple[int, ...]
    n_mean: float
    n2_mean: float
    fano: float
    degenerate: bool
    trace_residual: float
    hermiticity_residual: float
    min_eigenvalue: float
    tail_occupation: float
    liouvillian_residual: float
    mech_populations: np.ndarray = field(repr=False)


def destroy(n: int) -> sp.csr_matrix:
    """Truncated annihilation operator with ``sqrt(n)`` matrix elements."""
    return sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n), format="csr")


def _embed(op, position: int, dims) -> sp.csr_matrix:
    out = sp.identity(1, format="csr")
    for i, d in enumerate(dims):
        out = sp.kron(out, op if i == position else sp.identity(d, format="csr"), format="csr")
    return out


def _operators(p: SystemParams, f: FockConfig):
    nd = len(p.drives)
    f.check_budget(nd)
    dims = f.dims(nd)
    b = _embed(destroy(f.dim_mech), 0, dims)
    cavs = [_embed(destroy(f.dim_cav), 1 + i, dims) for i in range(nd)]
    return dims, b, cavs


def build_hamiltonian(p: SystemParams, f: FockConfig) -> sp.csr_matrix:
    """``w b+b + K (b+b)^2 + sum_d [-Delta_d a+a - g_d (a + a+)(b + b+)]``."""
    _, b, cavs = _operators(p, f)
    nb = (b.T @ b).tocsr()
    x_b = b + b.T
    H = p.mech_frequency * nb + p.kerr * (nb @ nb)
    for d, a in zip(p.drives, cavs):
        H = H - d.detuning * (a.T @ a) - d.coupling * ((a + a.T) @ x_b)
    return sp.csr_matrix(H, dtype=complex)


def liouvillian_from(H, dissipators) -> sp.csr_matrix:
    """Column-stacked generator for ``H`` and ``[(rate, jump_op), ...]``."""
    H = sp.csr_matrix(H, dtype=complex)
    n = H.shape[0]
    eye = sp.identity(n, format="csr", dtype=complex)
    L = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    for rate, c in dissipators:
        if rate == 0:
            continue
        c = sp.csr_matrix(c, dtype=complex)
        cd = c.conj().T
        cdc = (cd @ c).tocsr()
        L = L + rate * (RATE_FACTOR * sp.kron(c.conj(), c)
                        - sp.kron(eye, cdc) - sp.kron(cdc.T, eye))
    return sp.csr_matrix(L)


def _charges(p: SystemParams, dims) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")
    q = grids[0].astype(np.int64)
    for drive, c in zip(p.drives, grids[1:]):
        q = q + (-1 if drive.is_blue else 1) * c
    return q.ravel()


def build_liouvillian(p: SystemParams, f: FockConfig, *, regularize: bool = False,
                      warn: bool = True) -> Liouvillian:
    """Generator of the master equation on the truncated space.

    With zero intrinsic mechanical damping the mechanics is damped only
    optically and the system can be poorly conditioned; a
    :class:`ConditioningWarning` is emitted unless ``regularize`` adds a
    ``1e-8`` mechanical decay (opt-in only).
    """
    dims, b, cavs = _operators(p, f)
    gamma_m = p.mech_decay
    if gamma_m == 0:
        if regularize:
            gamma_m = REGULARIZING_DECAY
        elif warn:
            warnings.warn("mech_decay = 0: steady state fixed by optical damping alone; "
                          "the linear system may be poorly conditioned (regularize=True adds 1e-8)",
                          ConditioningWarning, stacklevel=2)
    dissipators = [(d.cavity_decay, a) for d, a in zip(p.drives, cavs)]
    dissipators += [(gamma_m * (p.bath_occupation + 1.0), b),
                    (gamma_m * p.bath_occupation, b.T.tocsr())]
    L = liouvillian_from(build_hamiltonian(p, f), dissipators)
    return Liouvillian(L, dims, _charges(p, dims))


def _reduced_system(L: Liouvillian, coherence_cutoff, row_scale=1e-9):
    n = L.hilbert_dim
    q = L.charges
    k = (q[:, None] - q[None, :]).ravel(order="F")
    s = (q[:, None] + q[None, :]).ravel(order="F")
    mask = k % 2 == 0
    if coherence_cutoff is not None:
        mask &= np.abs(k) <= coherence_cutoff
    keep = np.flatnonzero(mask)
    keep = keep[np.lexsort((k[keep], s[keep]))]
    A = L.matrix[keep][:, keep].tolil()
    # trace preservation makes any population equation redundant; the last one in
    # the charge ordering becomes the (scaled) trace row
    diag_flags = (keep % (n + 1)) == 0
    row = int(np.flatnonzero(diag_flags)[-1])
    # a tiny scale keeps partial pivoting from selecting the dense row early
    scale = row_scale * spla.norm(L.matrix, 1)
    A[row, :] = 0
    A[row, np.flatnonzero(diag_flags)] = scale
    rhs = np.zeros(keep.size, dtype=complex)
    rhs[row] = scale
    return keep, A.tocsc(), rhs


def _solve(A, rhs, direct: bool):
    if direct:
        try:
            lu = spla.splu(A, permc_spec="NATURAL", diag_pivot_thresh=0.1)
        except RuntimeError as exc:
            raise DegenerateSteadyStateError(f"singular factorization: {exc}") from exc
        return lu.solve(rhs)
    ilu = spla.spilu(A, drop_tol=1e-4, fill_factor=20, permc_spec="NATURAL")
    M = spla.LinearOperator(A.shape, ilu.solve, dtype=complex)
    x, info = spla.lgmres(A, rhs, M=M, rtol=1e-12, atol=0.0, maxiter=2000)
    if info != 0:
        raise ConvergenceError(f"iterative steady-state solve did not converge (info={info})")
    return x


def steady_state(L: Liouvillian, *, coherence_cutoff: int | None = 4,
                 direct_limit: int = DIRECT_SOLVE_LIMIT,
                 trace_tol: float = 1e-8) -> SteadyStateSolution:
    """Solve ``L vec(rho) = 0`` with ``tr rho = 1``.

    One redundant population equation is replaced by the trace
    constraint.  Unknowns are restricted to even coherence orders
    ``|k| <= coherence_cutoff`` (``None`` keeps every even order); the
    reported ``liouvillian_residual`` is measured against the full
    generator so the truncation error is visible.
    """
    n = L.hilbert_dim
    direct = n <= direct_limit
    # the iterative path needs a well-scaled constraint row to meet its tolerance
    keep, A, rhs = _reduced_system(L, coherence_cutoff, 1e-9 if direct else 1e-3)
    x = _solve(A, rhs, direct)
    if not np.all(np.isfinite(x)):
        raise DegenerateSteadyStateError("steady-state solve produced non-finite values")
    v = np.zeros(n * n, dtype=complex)
    v[keep] = x
    rho = v.reshape(n, n, order="F")
    trace = np.trace(rho)
    trace_residual = float(abs(trace - 1.0))
    if trace_residual > trace_tol:
        raise ConvergenceError(f"trace residual {trace_residual:.3g} exceeds {trace_tol:g}")
    rho = rho / trace
    herm = float(np.abs(rho - rho.conj().T).max())
    rho = 0.5 * (rho + rho.conj().T)
    resid = float(np.linalg.norm(L.matrix @ rho.ravel(order="F")) / spla.norm(L.matrix, 1))
    min_eig = float(np.linalg.eigvalsh(rho)[0])

    pops = np.real(np.diag(rho)).reshape(L.dims[0], -1).sum(axis=1)
    levels = np.arange(L.dims[0], dtype=float)
    n_mean = float(pops @ levels)
    n2_mean = float(pops @ levels**2)
    degenerate = n_mean < DEGENERATE_OCCUPATION
    fano = float("nan") if degenerate else (n2_mean - n_mean**2) / n_mean
    n_tail = max(1, math.ceil(0.1 * L.dims[0]))
    return SteadyStateSolution(
        rho=rho, dims=L.dims, n_mean=n_mean, n2_mean=n2_mean, fano=fano, degenerate=degenerate,
        trace_residual=trace_residual,
        hermiticity_residual=herm, min_eigenvalue=min_eig,
        tail_occupation=float(pops[-n_tail:].sum()), liouvillian_residual=resid,
        mech_populations=pops)


def solve(p: SystemParams, f: FockConfig | None = None, *, regularize: bool = False,
          coherence_cutoff: int | None = 4) -> SteadyStateSolution:
    """Build and solve in one call."""
    f = f or FockConfig()
    return steady_state(build_liouvillian(p, f, regularize=regularize),
                        coherence_cutoff=coherence_cutoff)


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    config: FockConfig
    solution: SteadyStateSolution | None
    history: list = field(default_factory=list)
    reason: str = ""


def convergence_sweep(p: SystemParams, base: FockConfig, *, step: int = 10,
                      rel_tol: float = 0.01, tail_tol: float = 1e-3,
                      max_dim_mech: int | None = None, regularize: bool = False,
                      coherence_cutoff: int | None = 4) -> ConvergenceReport:
    """Grow ``dim_mech`` in steps until ``<n>`` and F settle and the tail is empty.

    Stops with ``converged=False`` (never a silent number) when the
    dimension budget or ``max_dim_mech`` is reached first.  ``history``
    holds ``(dim_mech, n_mean, fano, tail_occupation)`` per solve.
    """
    nd = len(p.drives)
    f = base
    history = []
    prev = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditioningWarning)
        while True:
            sol = solve(p, f, regularize=regularize, coherence_cutoff=coherence_cutoff)
            history.append((f.dim_mech, sol.n_mean, sol.fano, sol.tail_occupation))
            if prev is not None and sol.tail_occupation < tail_tol:
                dn = abs(sol.n_mean - prev.n_mean) / max(abs(sol.n_mean), 1e-300)
                df = (abs(sol.fano - prev.fano) / abs(sol.fano)
                      if not sol.degenerate else 0.0)
                if dn < rel_tol and df < rel_tol:
                    return ConvergenceReport(True, f, sol, history, "converged")
            nxt = FockConfig(f.dim_mech + step, f.dim_cav, f.max_dim)
            if max_dim_mech is not None and nxt.dim_mech > max_dim_mech:
                return ConvergenceReport(False, f, sol, history,
                                         f"dim_mech limit {max_dim_mech} reached; "
                                         f"tail occupation {sol.tail_occupation:.3g}")
            if nxt.total_dim(nd) > nxt.max_dim:
                return ConvergenceReport(False, f, sol, history,
                                         f"dimension budget {f.max_dim} reached; "
                                         f"tail occupation {sol.tail_occupation:.3g}")
            prev, f = sol, nxt


def write_number_distribution(path, populations) -> None:
    """Two-column table: mechanical level and its population."""
    pops = np.asarray(populations, dtype=float)
    table = np.column_stack([np.arange(pops.size), pops])
    np.savetxt(path, table, fmt=["%d", "%.12e"], header="level population", comments="# ")
