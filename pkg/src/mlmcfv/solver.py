"""Upwind finite volume scheme with ghost-cell coupling at coefficient interfaces.

Away from interfaces each cell is updated with the upwind flux difference of
its own subdomain; the cell immediately right of every interface is a ghost
cell whose value is assigned by inverting the downstream flux at the upstream
flux value, which enforces flux continuity across the interface discretely.
Boundaries are periodic through index wrap-around; the wrap point is not
treated as a coefficient interface.

The time stepper is a compiled kernel that advances each sample row through
all its steps while the row stays cache resident.  All arithmetic is fixed
order and independent of batch composition, so results are bitwise
reproducible for any worker count or chunking.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CflViolation, ConfigError, NumericalError, OutOfMonotoneRange
from .flux import BISECT_ITERS, FLUX_TOL, KERNEL_BUCKLEY_LEVERETT, NEWTON_ITERS
from .grid import GridFunction, interface_indices


@njit(cache=True, inline="always")
def _flux_s(fid, k, u):
    if fid == KERNEL_BUCKLEY_LEVERETT:
        a = u * u
        b = (1.0 - u) * (1.0 - u)
        return a * (1.0 - k * b) / (a + b)
    return u  # KERNEL_LINEAR


@njit(cache=True, inline="always")
def _dflux_s(fid, k, u):
    if fid == KERNEL_BUCKLEY_LEVERETT:
        a = u * u
        b = (1.0 - u) * (1.0 - u)
        den = a + b
        num = a * (1.0 - k * b)
        dnum = 2.0 * u * (1.0 - k * b) + 2.0 * a * k * (1.0 - u)
        dden = 4.0 * u - 2.0
        return (dnum * den - num * dden) / (den * den)
    return 1.0


@njit(cache=True, inline="always")
def _invert_s(fid, k, p, lo0, hi0, tol):
    # same iteration structure as FluxModel.invert
    if p < _flux_s(fid, k, lo0) - tol or p > _flux_s(fid, k, hi0) + tol:
        return 0.0, 1
    lo = lo0
    hi = hi0
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if _flux_s(fid, k, mid) < p:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(NEWTON_ITERS):
        x = x - (_flux_s(fid, k, x) - p) / _dflux_s(fid, k, x)
        if x < lo0:
            x = lo0
        elif x > hi0:
            x = hi0
    if abs(_flux_s(fid, k, x) - p) > tol:
        return x, 2
    return x, 0


@njit(cache=True)
def _advance(u, kcell, ifc, k_left, k_right, inv_w, nsteps, scale_last, fid, lo, hi, tol):
    """Advance every row of u in place by nsteps; the last step is scaled.

    Returns (row, step, code) of the first failure, or (-1, -1, 0).
    code 1: inversion target out of the monotone bracket; code 2: no converge.
    """
    m, n = u.shape
    nifc = ifc.shape[1]
    F = np.empty(n)
    for r in range(m):
        for s in range(nsteps):
            sc = scale_last if s == nsteps - 1 else 1.0
            for j in range(n):
                F[j] = _flux_s(fid, kcell[r, j], u[r, j])
            # The upwind flux of cell j is f(k_j, u_{j-1}).  That equals
            # F[j-1] wherever k_j == k_{j-1}; the only cells where it does
            # not are the ghost cells (overwritten below) and, when the
            # coefficient wraps discontinuously, cell 0, which must apply
            # its own subdomain's flux to the wrapped neighbor state.
            fprev = _flux_s(fid, kcell[r, 0], u[r, n - 1])
            for j in range(n):
                fj = F[j]
                u[r, j] -= sc * inv_w[j] * (fj - fprev)
                fprev = fj
            for q in range(nifc):
                p_cell = ifc[r, q]
                target = _flux_s(fid, k_left[r, q], u[r, p_cell - 1])
                val, code = _invert_s(fid, k_right[r, q], target, lo, hi, tol)
                if code != 0:
                    return r, s, code
                u[r, p_cell] = val
    return -1, -1, 0


@dataclass(frozen=True)
class SolverConfig:
    """Scheme parameters: flux model, dt/dx ratio, and final time."""

    flux: object
    lam: float = 0.2
    t_end: float = 0.2

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lam must be nonnegative")
        if self.t_end < 0:
            raise ConfigError("t_end must be nonnegative")
        rate = self.lam * self.flux.deriv_max
        if rate > 1.0:
            raise CflViolation(
                f"lam * max|df/du| = {rate:.6g} > 1 on the validated bracket"
            )


@dataclass(frozen=True)
class Solution:
    final: GridFunction
    steps: int
    cell_updates: int


def cfl_check(cfg, coeff, data_range=None, samples=512):
    """Verify lam * max|df/du| <= 1 over the coefficient values and data range.

    Returns the largest rate found; raises CflViolation when it exceeds one.
    """
    if cfg.lam == 0.0:
        return 0.0
    lo, hi = data_range if data_range is not None else cfg.flux.bracket
    us = np.linspace(lo, hi, samples)
    worst = 0.0
    for kv in np.unique(np.asarray(coeff.values, dtype=float)):
        worst = max(worst, float(np.max(np.abs(cfg.flux.derivative(kv, us)))))
    rate = cfg.lam * worst
    if rate > 1.0:
        raise CflViolation(f"CFL violated: lam * max|df/du| = {rate:.6g} > 1")
    return rate


def _kernel_id(flux_model):
    if flux_model.kernel_id is None:
        raise ConfigError(
            f"flux model {flux_model.name!r} has no compiled kernel; "
            "the solver supports the registered flux families only"
        )
    return int(flux_model.kernel_id)


def _step_schedule(lam, dx_min, t_end):
    """Number of steps of size lam*dx plus the scale of the shortened last step."""
    if t_end == 0.0:
        return 0, 1.0
    if lam <= 0.0:
        raise ConfigError("lam must be positive to advance to t_end > 0")
    dt = lam * dx_min
    nsteps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    scale_last = (t_end - (nsteps - 1) * dt) / dt
    return nsteps, scale_last


def coefficient_cells(n_cells, iface_idx, values):
    """Per-cell coefficient rows from interface cell indices and region values."""
    iface_idx = np.atleast_2d(iface_idx)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    m = values.shape[0]
    cells = np.arange(n_cells)
    region = np.zeros((m, n_cells), dtype=np.int64)
    for q in range(iface_idx.shape[1]):
        region += cells[None, :] >= iface_idx[:, q : q + 1]
    return np.take_along_axis(values, region, axis=1)


def advance_states(states, kcell, iface_idx, k_left, k_right, grid, cfg, nsteps=None):
    """Advance a batch of sample rows in place to cfg.t_end on a shared grid.

    states/kcell are (m, n) float64; iface_idx/k_left/k_right are (m, J).
    Returns (steps, cell_updates).  When nsteps is given it overrides the
    schedule (used for single fixed steps of size lam*dx).
    """
    if not (states.flags.c_contiguous and states.dtype == np.float64):
        raise ConfigError("states must be a C-contiguous float64 array")
    m, n = states.shape
    if nsteps is None:
        nsteps, scale_last = _step_schedule(cfg.lam, grid.dx_min, cfg.t_end)
    else:
        scale_last = 1.0
    if nsteps == 0:
        return 0, 0
    dt = cfg.lam * grid.dx_min
    if grid.uniform:
        inv_w = np.full(n, dt / grid.dx_min)
    else:
        inv_w = dt / grid.widths
    lo, hi = cfg.flux.bracket
    row, step, code = _advance(
        states,
        np.ascontiguousarray(kcell, dtype=np.float64),
        np.ascontiguousarray(iface_idx, dtype=np.int64).reshape(m, -1),
        np.ascontiguousarray(k_left, dtype=np.float64).reshape(m, -1),
        np.ascontiguousarray(k_right, dtype=np.float64).reshape(m, -1),
        inv_w,
        nsteps,
        scale_last,
        _kernel_id(cfg.flux),
        lo,
        hi,
        FLUX_TOL,
    )
    if code == 1:
        raise OutOfMonotoneRange(
            f"interface inversion target left the monotone bracket {cfg.flux.bracket} "
            f"(batch row {row}, step {step})"
        )
    if code == 2:
        raise NumericalError(
            f"interface inversion failed to converge (batch row {row}, step {step})"
        )
    return nsteps, nsteps * m * n


def _single_problem(state, coeff):
    grid = state.grid
    idx = interface_indices(grid, coeff)
    values = np.asarray(coeff.values, dtype=float)
    kcell = coefficient_cells(grid.n_cells, idx[None, :], values[None, :])
    k_left = values[:-1][None, :]
    k_right = values[1:][None, :]
    return idx[None, :], kcell, k_left, k_right


def fvm_step(state, coeff, cfg):
    """One scheme step of size lam*dx (interior update, then ghost cells)."""
    idx, kcell, k_left, k_right = _single_problem(state, coeff)
    u = state.values[None, :].copy()
    advance_states(u, kcell, idx, k_left, k_right, state.grid, cfg, nsteps=1)
    return GridFunction(state.grid, u[0])


def solve(u0, coeff, cfg):
    """March the scheme from the projected initial datum to t = t_end.

    The last step is shortened so the result lands exactly on t_end.
    """
    cfl_check(cfg, coeff)
    idx, kcell, k_left, k_right = _single_problem(u0, coeff)
    u = u0.values[None, :].copy()
    steps, updates = advance_states(u, kcell, idx, k_left, k_right, u0.grid, cfg)
    return Solution(final=GridFunction(u0.grid, u[0]), steps=steps, cell_updates=updates)
