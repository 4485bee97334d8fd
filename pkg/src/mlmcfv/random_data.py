"""Seeded, reproducible samplers for the experiments' random coefficients.

Sampling is counter based: the Philox key encodes (master_seed, level,
replica) and every sample index owns a fixed block of the counter space.
A chunk of samples is drawn with one vectorized call, and the draw belonging
to a given SampleKey is bitwise identical no matter how samples are chunked
or distributed over workers.  Within one multilevel difference term the same
draw feeds both the fine and the coarse solve by construction, since both
read the same key.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from .errors import ConfigError
from .grid import Coefficient, StepFunction

# 64-bit draws reserved per sample key; Philox yields 4 draws per counter
# block, so each sample advances the counter by DRAWS_PER_SAMPLE // 4.
DRAWS_PER_SAMPLE = 8
_BLOCKS_PER_SAMPLE = DRAWS_PER_SAMPLE // 4

_MAX_LEVEL = 2**16
_MAX_REPLICA = 2**32


@dataclass(frozen=True)
class SampleKey:
    """Identifies one draw: (master_seed, level, sample_index, replica)."""

    master_seed: int
    level: int = 0
    sample_index: int = 0
    replica: int = 0

    def __post_init__(self):
        if not 0 <= self.level < _MAX_LEVEL:
            raise ConfigError(f"level must be in [0, {_MAX_LEVEL})")
        if not 0 <= self.replica < _MAX_REPLICA:
            raise ConfigError(f"replica must be in [0, {_MAX_REPLICA})")
        if self.sample_index < 0:
            raise ConfigError("sample_index must be nonnegative")


def _stream_key(master_seed, level, replica):
    low = master_seed & (2**64 - 1)
    high = (replica << 16) | level
    return low | (high << 64)


def derive_stream(key):
    """Random generator positioned at the key's private counter block."""
    ph = Philox(key=_stream_key(key.master_seed, key.level, key.replica))
    ph.advance(key.sample_index * _BLOCKS_PER_SAMPLE)
    return Generator(ph)


def _uniform_block(master_seed, level, replica, lo, hi, dim):
    """Unit uniforms for sample indices [lo, hi): shape (hi - lo, dim)."""
    if dim > DRAWS_PER_SAMPLE:
        raise ConfigError(f"at most {DRAWS_PER_SAMPLE} draws per sample")
    ph = Philox(key=_stream_key(master_seed, level, replica))
    ph.advance(lo * _BLOCKS_PER_SAMPLE)
    raw = Generator(ph).random((hi - lo, DRAWS_PER_SAMPLE))
    return raw[:, :dim]


def default_initial_datum():
    """Two-level saturation profile: 0.8 on (-0.9, -0.2), 0.4 elsewhere."""
    return StepFunction([-0.9, -0.2], [0.4, 0.8, 0.4])


@dataclass(frozen=True, eq=False)
class InterfacePositionModel:
    """Coefficient jumps values[0] -> values[1] at a uniform random position."""

    position_range: tuple = (-0.3, 0.3)
    values: tuple = (1.0, 2.0)
    domain: tuple = (-1.0, 1.0)
    u0: StepFunction = field(default_factory=default_initial_datum)
    kind = "interface_position"
    dim = 1

    def box(self):
        return [self.position_range]

    def interfaces(self, thetas):
        m = thetas.shape[0]
        return thetas[:, :1], np.tile(np.asarray(self.values, dtype=float), (m, 1))


@dataclass(frozen=True, eq=False)
class LayerPermeabilityModel:
    """Fixed interface position; both layer values get independent uniform shifts."""

    jump_at: float = 0.0
    base_values: tuple = (1.0, 2.0)
    shift_range: tuple = (-0.3, 0.3)
    domain: tuple = (-1.0, 1.0)
    u0: StepFunction = field(default_factory=default_initial_datum)
    kind = "layer_permeability"
    dim = 2

    def box(self):
        return [self.shift_range, self.shift_range]

    def interfaces(self, thetas):
        m = thetas.shape[0]
        pos = np.full((m, 1), float(self.jump_at))
        vals = np.asarray(self.base_values, dtype=float)[None, :] + thetas[:, :2]
        return pos, vals


@dataclass(frozen=True, eq=False)
class CustomModel:
    """User-supplied map from stochastic points to coefficient interfaces."""

    dim: int
    box_list: tuple
    interfaces_fn: callable
    domain: tuple = (-1.0, 1.0)
    u0: StepFunction = field(default_factory=default_initial_datum)
    kind = "custom"

    def box(self):
        return list(self.box_list)

    def interfaces(self, thetas):
        return self.interfaces_fn(thetas)


def experiment1():
    """Uncertain rock-layer interface: k = 1 left, 2 right of xi ~ U[-0.3, 0.3]."""
    return InterfacePositionModel()


def experiment2():
    """Uncertain layer permeabilities: k = 1+s1 left, 2+s2 right of x = 0."""
    return LayerPermeabilityModel()


def draw_thetas(model, master_seed, level, replica, lo, hi):
    """Stochastic points for sample indices [lo, hi), mapped into the model box."""
    unit = _uniform_block(master_seed, level, replica, lo, hi, model.dim)
    box = model.box()
    out = np.empty_like(unit)
    for d, (a, b) in enumerate(box):
        out[:, d] = a + (b - a) * unit[:, d]
    return out


def draw_sample(model, key):
    """Single draw for a SampleKey: (u0, Coefficient, flux parameter dict)."""
    thetas = draw_thetas(
        model, key.master_seed, key.level, key.replica, key.sample_index, key.sample_index + 1
    )
    pos, vals = model.interfaces(thetas)
    return model.u0, Coefficient(pos[0], vals[0]), {}


def coefficient_at(model, theta):
    """Deterministic coefficient at a given stochastic point (for quadrature)."""
    pos, vals = model.interfaces(np.atleast_2d(np.asarray(theta, dtype=float)))
    return Coefficient(pos[0], vals[0])
