"""Monte Carlo and multilevel Monte Carlo finite volume methods for scalar
conservation laws whose flux switches across piecewise-constant coefficient
interfaces at uncertain positions or with uncertain values."""

__version__ = "0.1.0"

from .analysis import (
    ConvergenceRow,
    ReferenceSolution,
    convergence_table,
    ooc_fit,
    reference_solution,
    rms_error,
)
from .errors import (
    CflViolation,
    ConfigError,
    DegenerateFit,
    DegenerateSubdomain,
    InvalidTolerance,
    MlmcFvError,
    MonotonicityViolation,
    NumericalError,
    OutOfMonotoneRange,
    UnsupportedDimension,
    ZeroReference,
)
from .flux import (
    FluxModel,
    buckley_leverett,
    eval_flux,
    invert_flux,
    linear_flux,
    validate_monotone_bracket,
)
from .grid import (
    AlignedGrid,
    Coefficient,
    GridFunction,
    StepFunction,
    build_aligned_grid,
    l1_distance,
    l1_norm,
    output_grid,
    project_initial_datum,
    project_to_grid,
    total_variation,
    uniform_grid,
)
from .mc import EstimatorResult, MomentAccumulator, mc_estimate
from .mlmc import (
    LevelPlan,
    make_level_plan,
    mlmc_estimate,
    optimal_sample_numbers,
    variance_estimate,
)
from .random_data import (
    CustomModel,
    InterfacePositionModel,
    LayerPermeabilityModel,
    SampleKey,
    coefficient_at,
    derive_stream,
    draw_sample,
    draw_thetas,
    experiment1,
    experiment2,
)
from .solver import SolverConfig, Solution, cfl_check, fvm_step, solve
