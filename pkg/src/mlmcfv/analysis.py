"""Quadrature references, the K-replica RMS error estimator, and order fits.

The reference mean is a stochastic-space trapezoidal quadrature over fine
solves; it is the single most expensive artifact, so it is cached on disk
keyed by every parameter that influences it.
"""

import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateFit, UnsupportedDimension, ZeroReference
from .grid import (
    DEFAULT_OUTPUT_CELLS,
    GridFunction,
    l1_distance,
    l1_norm,
    output_grid,
)
from .mc import _neumaier_add, solve_rows_uniform
from .mlmc import make_level_plan, mlmc_estimate
from .parallel import chunk_ranges, map_ordered, rows_per_chunk
from .grid import uniform_grid

CACHE_SCHEMA = 1
CACHE_ENV = "MLMCFV_CACHE_DIR"


@dataclass(frozen=True)
class ReferenceSolution:
    mean: GridFunction
    meta: dict


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    dx: float
    rms_percent: float
    runtime_s: float
    cell_updates: int


def _describe(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"_type": type(obj).__name__}
        for f in dataclasses.fields(obj):
            out[f.name] = _describe(getattr(obj, f.name))
        return out
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_describe(v) for v in obj]
    if callable(obj):
        return getattr(obj, "__name__", repr(obj))
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _cache_dir(cache_dir):
    if cache_dir is not None:
        return Path(cache_dir)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "mlmcfv"


def _trapezoid_nodes(box, n):
    """Equispaced nodes with normalized trapezoidal weights on [a, b]."""
    a, b = box
    if n < 2:
        raise ConfigError("need at least 2 quadrature nodes per dimension")
    t = np.linspace(a, b, n)
    if b == a:
        return t, np.full(n, 1.0 / n)
    w = np.full(n, 1.0 / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return t, w


@dataclass(frozen=True)
class _QuadTask:
    model: object
    cfg: object
    thetas: np.ndarray
    weights: np.ndarray
    dx_star: float
    out_cells: int


def _quadrature_chunk(task):
    positions, values = task.model.interfaces(task.thetas)
    rows, updates = solve_rows_uniform(
        task.model, task.cfg, positions, values, task.dx_star, task.out_cells
    )
    return (task.weights[:, None] * rows).sum(axis=0), updates


def reference_solution(
    model, nodes, dx_star, cfg, workers=1, cache_dir=None,
    out_cells=DEFAULT_OUTPUT_CELLS, use_cache=True,
):
    """Trapezoidal-quadrature reference mean from fine solves at dx_star.

    ``nodes`` is the per-dimension node count (int, or a tuple per dimension);
    the rule is tensorized for two stochastic dimensions.  Cached on disk.
    """
    dim = model.dim
    if dim not in (1, 2):
        raise UnsupportedDimension(f"{dim} stochastic dimensions not supported")
    counts = (nodes,) * dim if np.isscalar(nodes) else tuple(nodes)
    if len(counts) != dim:
        raise ConfigError("one node count required per stochastic dimension")

    box = model.box()
    grids_1d = [_trapezoid_nodes(box[d], counts[d]) for d in range(dim)]
    if dim == 1:
        thetas = grids_1d[0][0][:, None]
        weights = grids_1d[0][1]
    else:
        t1, w1 = grids_1d[0]
        t2, w2 = grids_1d[1]
        thetas = np.stack(
            [np.repeat(t1, t2.size), np.tile(t2, t1.size)], axis=1
        )
        weights = np.outer(w1, w2).ravel()

    meta = {
        "schema": CACHE_SCHEMA,
        "model": _describe(model),
        "flux": _describe(cfg.flux),
        "lam": cfg.lam,
        "t_end": cfg.t_end,
        "nodes": list(counts),
        "dx_star": dx_star,
        "out_cells": out_cells,
    }
    key = hashlib.sha256(
        json.dumps(meta, sort_keys=True).encode()
    ).hexdigest()[:24]
    grid_out = output_grid(model.domain, out_cells)

    cache_path = _cache_dir(cache_dir) / f"reference_{key}.npz"
    if use_cache and cache_path.exists():
        with np.load(cache_path) as payload:
            return ReferenceSolution(
                mean=GridFunction(grid_out, payload["mean"]),
                meta=json.loads(str(payload["meta"])),
            )

    n_cells = uniform_grid(model.domain, dx_star).n_cells
    total = thetas.shape[0]
    tasks = [
        _QuadTask(model, cfg, thetas[lo:hi], weights[lo:hi], dx_star, out_cells)
        for lo, hi in chunk_ranges(total, rows_per_chunk(n_cells))
    ]
    start = time.perf_counter()
    mean = np.zeros(out_cells)
    comp = np.zeros(out_cells)
    updates = 0
    for wsum, work in map_ordered(_quadrature_chunk, tasks, workers):
        _neumaier_add(mean, comp, wsum)
        updates += work
    mean = mean + comp
    meta["cell_updates"] = int(updates)
    meta["runtime_s"] = time.perf_counter() - start

    if use_cache:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_path.with_suffix(".tmp.npz")
        np.savez(tmp, mean=mean, meta=json.dumps(meta, sort_keys=True))
        os.replace(tmp, cache_path)
    return ReferenceSolution(mean=GridFunction(grid_out, mean), meta=meta)


def _mean_function(run):
    if hasattr(run, "mean_function"):
        return run.mean_function()
    if isinstance(run, ReferenceSolution):
        return run.mean
    return run


def rms_error(ref, runs):
    """Percent root-mean-square relative L1 error of runs against the reference.

    RMS_i = 100 * |U_ref - U_i|_L1 / |U_ref|_L1, combined as
    sqrt(mean of RMS_i^2) over the K runs.
    """
    if not runs:
        raise ConfigError("rms_error needs at least one run")
    ref_mean = _mean_function(ref)
    denom = l1_norm(ref_mean)
    if denom == 0.0:
        raise ZeroReference("reference mean has zero L1 norm")
    per_run = [
        100.0 * l1_distance(ref_mean, _mean_function(run)) / denom for run in runs
    ]
    rms = float(np.sqrt(np.mean(np.square(per_run))))
    return rms, per_run


def ooc_fit(xs, ys):
    """Observed order of convergence: least-squares slope of log2 ys vs log2 xs."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size != ys.size or xs.size < 2:
        raise ConfigError("ooc_fit needs two or more (x, y) pairs")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ConfigError("ooc_fit needs positive data")
    if np.all(xs == xs[0]):
        raise DegenerateFit("all abscissae identical")
    return float(np.polyfit(np.log2(xs), np.log2(ys), 1)[0])


def convergence_table(
    model, dx0, levels, cfg, reference, replicas=30, master_seed=0,
    workers=1, out_cells=DEFAULT_OUTPUT_CELLS, alignment="snap",
):
    """RMS error rows for a sweep over finest levels, one plan per row.

    Each row runs `replicas` independent estimates; the replica key block for
    the row with finest level L is [L*replicas, (L+1)*replicas), so rows do
    not share draws.  Runtime and cell updates are reported per replica.
    """
    rows = []
    per_row = {}
    for level in levels:
        plan = make_level_plan(level, dx0)
        runs = [
            mlmc_estimate(
                model, plan, cfg, master_seed=master_seed,
                replica=level * replicas + i, workers=workers,
                out_cells=out_cells, alignment=alignment,
            )
            for i in range(replicas)
        ]
        rms, per = rms_error(reference, runs)
        per_row[level] = per
        rows.append(
            ConvergenceRow(
                level=level,
                dx=plan.dx(level),
                rms_percent=rms,
                runtime_s=float(np.mean([r.runtime_s for r in runs])),
                cell_updates=runs[0].cell_updates,
            )
        )
    return rows, per_row
