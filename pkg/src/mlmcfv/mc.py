"""Single-level Monte Carlo estimator of the solution mean on the output grid.

Samples are drawn, solved, and projected to the fixed output grid in chunks;
chunk boundaries and the reduction order are functions of the problem alone,
so the estimate is bitwise reproducible for any worker count.  Sums are
compensated (Neumaier) across chunks to resist cancellation at large sample
counts.
"""

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .grid import (
    DEFAULT_OUTPUT_CELLS,
    Coefficient,
    GridFunction,
    build_aligned_grid,
    output_grid,
    project_initial_datum,
    project_rows_nested,
    project_to_grid,
    snap_interface_indices,
    uniform_grid,
)
from .parallel import chunk_ranges, map_ordered, rows_per_chunk
from .random_data import draw_thetas
from .solver import advance_states, coefficient_cells, solve


def _neumaier_add(total, comp, value):
    """Add `value` into the running compensated sum (total, comp) in place."""
    t = total + value
    big = np.abs(total) >= np.abs(value)
    comp += np.where(big, (total - t) + value, (value - t) + total)
    total[:] = t


@dataclass
class MomentAccumulator:
    """Running first and second moments of grid-function samples."""

    count: int
    vsum: np.ndarray
    vcomp: np.ndarray
    sqsum: np.ndarray
    sqcomp: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(0, np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n))

    def add_batch(self, rows):
        """Absorb sample rows (m, n); within-batch sums are pairwise."""
        self.add_moments(rows.sum(axis=0), (rows * rows).sum(axis=0), rows.shape[0])

    def add_moments(self, vsum, sqsum, count):
        _neumaier_add(self.vsum, self.vcomp, vsum)
        _neumaier_add(self.sqsum, self.sqcomp, sqsum)
        self.count += count

    def mean(self):
        return (self.vsum + self.vcomp) / self.count

    def second_moment(self):
        return (self.sqsum + self.sqcomp) / self.count

    def variance_biased(self):
        """E[(X - mean)^2] with the 1/count normalization; clipped at zero."""
        return np.maximum(self.second_moment() - self.mean() ** 2, 0.0)


@dataclass
class EstimatorResult:
    """Mean and cellwise variance on the output grid, plus work counters."""

    grid: object
    mean: np.ndarray
    variance: np.ndarray
    samples_per_level: tuple
    cell_updates: int
    runtime_s: float

    @property
    def std(self):
        return np.sqrt(self.variance)

    def mean_function(self):
        return GridFunction(self.grid, self.mean)


@dataclass(frozen=True)
class _ChunkTask:
    model: object
    cfg: object
    master_seed: int
    level: int
    replica: int
    lo: int
    hi: int
    dx_fine: float
    dx_coarse: float | None
    out_cells: int
    alignment: str


def solve_rows_uniform(model, cfg, positions, values, dx_target, out_cells):
    """Solve one sample per row on a shared uniform grid; rows on the output grid."""
    grid = uniform_grid(model.domain, dx_target)
    lo_k, hi_k = cfg.flux.k_range
    if np.any(values < lo_k) or np.any(values > hi_k):
        raise NumericalError(
            "sampled coefficient value outside the flux model's validated k range"
        )
    if positions.shape[1]:
        iface = snap_interface_indices(grid, positions)
    else:
        iface = np.empty((values.shape[0], 0), dtype=np.int64)
    kcell = coefficient_cells(grid.n_cells, iface, values)
    u0_row = project_initial_datum(model.u0, grid).values
    states = np.tile(u0_row, (values.shape[0], 1))
    _, updates = advance_states(
        states, kcell, iface, values[:, :-1], values[:, 1:], grid, cfg
    )
    return project_rows_nested(states, grid.n_cells, out_cells), updates


def _solve_rows_exact_interfaces(model, cfg, positions, values, dx_target, out_cells):
    """Per-sample nonuniform grids (interfaces kept exact); slower, fidelity mode."""
    out = output_grid(model.domain, out_cells)
    rows = np.empty((values.shape[0], out_cells))
    updates = 0
    for i in range(values.shape[0]):
        coeff = Coefficient(positions[i], values[i])
        grid, snapped = build_aligned_grid(
            model.domain, coeff, dx_target, strategy="per_subdomain"
        )
        sol = solve(project_initial_datum(model.u0, grid), snapped, cfg)
        rows[i] = project_to_grid(sol.final, out).values
        updates += sol.cell_updates
    return rows, updates


def _sample_difference_chunk(task):
    """Chunk worker: per-sample (fine - coarse) rows reduced to partial moments."""
    model = task.model
    thetas = draw_thetas(
        model, task.master_seed, task.level, task.replica, task.lo, task.hi
    )
    positions, values = model.interfaces(thetas)
    solver_fn = (
        solve_rows_uniform if task.alignment == "snap" else _solve_rows_exact_interfaces
    )
    try:
        rows, updates = solver_fn(
            model, task.cfg, positions, values, task.dx_fine, task.out_cells
        )
        if task.dx_coarse is not None:
            rows_c, updates_c = solver_fn(
                model, task.cfg, positions, values, task.dx_coarse, task.out_cells
            )
            rows = rows - rows_c
            updates += updates_c
    except NumericalError as exc:
        raise type(exc)(
            f"{exc} [level={task.level} replica={task.replica} "
            f"sample_indices={task.lo}..{task.hi - 1}]"
        ) from None
    return rows.sum(axis=0), (rows * rows).sum(axis=0), updates


def difference_moments(
    model, cfg, dx_fine, dx_coarse, num_samples, master_seed, level, replica,
    out_cells, workers=1, alignment="snap",
):
    """Moments of u_fine - u_coarse over num_samples coupled draws."""
    grid_cells = uniform_grid(model.domain, dx_fine).n_cells
    tasks = [
        _ChunkTask(
            model, cfg, master_seed, level, replica, lo, hi,
            dx_fine, dx_coarse, out_cells, alignment,
        )
        for lo, hi in chunk_ranges(num_samples, rows_per_chunk(grid_cells))
    ]
    acc = MomentAccumulator.zeros(out_cells)
    updates = 0
    for vsum, sqsum, work in map_ordered(_sample_difference_chunk, tasks, workers):
        acc.add_moments(vsum, sqsum, 0)
        updates += work
    acc.count = num_samples
    return acc, updates


def mc_estimate(
    model, dx, num_samples, cfg, master_seed=0, level=0, replica=0,
    workers=1, out_cells=DEFAULT_OUTPUT_CELLS, alignment="snap",
):
    """Sample mean of num_samples independent solves at mesh width dx."""
    if num_samples < 1:
        raise ConfigError("num_samples must be at least 1")
    start = time.perf_counter()
    acc, updates = difference_moments(
        model, cfg, dx, None, num_samples, master_seed, level, replica,
        out_cells, workers, alignment,
    )
    return EstimatorResult(
        grid=output_grid(model.domain, out_cells),
        mean=acc.mean(),
        variance=acc.variance_biased(),
        samples_per_level=(num_samples,),
        cell_updates=updates,
        runtime_s=time.perf_counter() - start,
    )
