"""Multilevel Monte Carlo estimator with work-optimal per-level sample counts.

The estimator telescopes solution differences across a mesh hierarchy
dx_l = 2^-l * dx0 and averages the level-l difference over M_l independent
draws, where within each difference both resolutions consume the same draw.
The per-level sample counts minimize computational work subject to an error
tolerance.
"""

import math
import time
from dataclasses import dataclass

from .errors import ConfigError, InvalidTolerance
from .grid import DEFAULT_OUTPUT_CELLS, output_grid
from .mc import EstimatorResult, difference_moments


def optimal_sample_numbers(
    levels, dx0, eps=None, norm_p=1.0, moment_q=2.0, conv_rate=0.5, work_exp=2.0
):
    """Work-minimizing sample counts M_0..M_L for the telescoped estimator.

    With pt = max(norm_p, moment_q) and dxL the finest width,

        M_0 = ceil( ((1 + dx0^(s/pt) * S) / (eps - dxL^(s*q/p)))^(1/(q-1)) ),
        S   = sum_{l=1..L} 2^(l*(w*(q-1)/q - s/pt)),
        M_l = ceil( M0_unrounded * dx0^(s/pt) * 2^(-l*(s/pt + w/q)) ),

    where s/q/p/w are conv_rate/moment_q/norm_p/work_exp.  The *unrounded*
    M_0 feeds the M_l formula; all rounding is upward.  eps defaults to
    2*dxL^(s*q/p), which makes the denominator equal to the bias term.
    """
    if levels < 0:
        raise ConfigError("levels must be nonnegative")
    if moment_q <= 1.0:
        raise ConfigError("moment_q must exceed 1")
    if dx0 <= 0.0:
        raise ConfigError("dx0 must be positive")
    pt = max(norm_p, moment_q)
    dx_finest = dx0 * 2.0 ** (-levels)
    bias = dx_finest ** (conv_rate * moment_q / norm_p)
    if eps is None:
        eps = 2.0 * bias
    if not eps > bias:
        raise InvalidTolerance(
            f"eps = {eps:.6g} must exceed the bias term dxL^(sq/p) = {bias:.6g}"
        )
    growth = sum(
        2.0 ** (l * (work_exp * (moment_q - 1.0) / moment_q - conv_rate / pt))
        for l in range(1, levels + 1)
    )
    m0 = ((1.0 + dx0 ** (conv_rate / pt) * growth) / (eps - bias)) ** (
        1.0 / (moment_q - 1.0)
    )
    counts = [math.ceil(m0)]
    for l in range(1, levels + 1):
        counts.append(
            math.ceil(
                m0 * dx0 ** (conv_rate / pt)
                * 2.0 ** (-l * (conv_rate / pt + work_exp / moment_q))
            )
        )
    return counts


@dataclass(frozen=True)
class LevelPlan:
    """Mesh hierarchy dx_l = 2^-l * dx0 with per-level sample counts."""

    finest_level: int
    dx0: float
    samples: tuple
    eps: float
    norm_p: float = 1.0
    moment_q: float = 2.0
    conv_rate: float = 0.5
    work_exp: float = 2.0

    def __post_init__(self):
        if len(self.samples) != self.finest_level + 1:
            raise ConfigError("plan needs one sample count per level")
        if any(m < 1 for m in self.samples):
            raise ConfigError("every level needs at least one sample")

    def dx(self, level):
        return self.dx0 * 2.0 ** (-level)


def make_level_plan(
    levels, dx0, eps=None, norm_p=1.0, moment_q=2.0, conv_rate=0.5, work_exp=2.0
):
    counts = optimal_sample_numbers(
        levels, dx0, eps, norm_p, moment_q, conv_rate, work_exp
    )
    if eps is None:
        eps = 2.0 * (dx0 * 2.0 ** (-levels)) ** (conv_rate * moment_q / norm_p)
    return LevelPlan(
        finest_level=levels,
        dx0=dx0,
        samples=tuple(counts),
        eps=float(eps),
        norm_p=norm_p,
        moment_q=moment_q,
        conv_rate=conv_rate,
        work_exp=work_exp,
    )


def variance_estimate(level_moments):
    """Cellwise variance diagnostic: sum over levels of biased sample variances."""
    return sum(acc.variance_biased() for acc in level_moments)


def mlmc_estimate(
    model, plan, cfg, master_seed=0, replica=0, workers=1,
    out_cells=DEFAULT_OUTPUT_CELLS, alignment="snap",
):
    """Telescoped multilevel estimate of the solution mean at t_end.

    Level l averages u_{dx_l} - u_{dx_{l-1}} over plan.samples[l] draws (the
    level-(-1) solution is zero, so level 0 averages plain solves); within a
    difference both resolutions consume the same draw.  Distinct levels and
    replicas use disjoint key blocks and are therefore independent.
    """
    start = time.perf_counter()
    level_moments = []
    updates = 0
    for level, num in enumerate(plan.samples):
        dx_fine = plan.dx(level)
        dx_coarse = plan.dx(level - 1) if level > 0 else None
        acc, work = difference_moments(
            model, cfg, dx_fine, dx_coarse, num, master_seed, level, replica,
            out_cells, workers, alignment,
        )
        level_moments.append(acc)
        updates += work
    mean = level_moments[0].mean().copy()
    for acc in level_moments[1:]:
        mean += acc.mean()
    return EstimatorResult(
        grid=output_grid(model.domain, out_cells),
        mean=mean,
        variance=variance_estimate(level_moments),
        samples_per_level=tuple(plan.samples),
        cell_updates=updates,
        runtime_s=time.perf_counter() - start,
    )
