import numpy as np
import pytest

from mlmcfv import (
    GridFunction,
    InterfacePositionModel,
    build_aligned_grid,
    coefficient_at,
    l1_norm,
    ooc_fit,
    output_grid,
    project_initial_datum,
    project_to_grid,
    reference_solution,
    rms_error,
    solve,
)
from mlmcfv.analysis import _trapezoid_nodes, convergence_table
from mlmcfv.errors import (
    ConfigError,
    DegenerateFit,
    UnsupportedDimension,
    ZeroReference,
)

# Published convergence data for the uncertain-interface experiment:
# (finest mesh width, RMS%) and (runtime seconds, RMS%), with the
# least-squares log-log slopes quoted alongside the plots.
EXP1_DX = [2.0**-5, 2.0**-6, 2.0**-7, 2.0**-8, 2.0**-9, 2.0**-10]
EXP1_RMS = [
    4.03780262292757, 2.46696210462274, 1.43538329841369,
    0.810277940630155, 0.409640867466471, 0.167111507119717,
]
EXP1_RUNTIME = [
    0.0475067471211111, 0.171219623742222, 0.612535331616667,
    2.60163620862444, 10.7249629039178, 39.6374996860422,
]
EXP2_RMS = [
    3.79597398255920, 2.24789514438061, 1.33955878114555,
    0.746532985297767, 0.374108732635936, 0.150665644359034,
]
EXP2_RUNTIME = [
    0.0470449738000000, 0.192052041266667, 0.632521271666667,
    2.69513145753333, 10.1173227042667, 38.1413222723000,
]


def test_ooc_fit_reproduces_published_slopes():
    assert ooc_fit(EXP1_DX, EXP1_RMS) == pytest.approx(0.901979894028114, abs=1e-9)
    assert ooc_fit(EXP1_RUNTIME, EXP1_RMS) == pytest.approx(-0.460944537265283, abs=1e-9)
    assert ooc_fit(EXP1_DX, EXP2_RMS) == pytest.approx(0.910852975405070, abs=1e-9)
    assert ooc_fit(EXP2_RUNTIME, EXP2_RMS) == pytest.approx(-0.471782533443006, abs=1e-9)


def test_ooc_fit_exact_power_law():
    xs = np.array([1.0, 0.5, 0.25, 0.125])
    ys = 3.7 * xs**0.9
    assert ooc_fit(xs, ys) == pytest.approx(0.9, abs=1e-12)
    # scaling ys by a positive constant shifts the intercept only
    assert ooc_fit(xs, 100 * ys) == pytest.approx(0.9, abs=1e-12)


def test_ooc_fit_rejects_degenerate_input():
    with pytest.raises(DegenerateFit):
        ooc_fit([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ConfigError):
        ooc_fit([1.0], [2.0])
    with pytest.raises(ConfigError):
        ooc_fit([1.0, 2.0], [1.0, -2.0])


def _flat(grid, value):
    return GridFunction(grid, np.full(grid.n_cells, value))


def test_rms_error_zero_for_identical_runs():
    grid = output_grid((-1.0, 1.0))
    ref = _flat(grid, 0.5)
    rms, per = rms_error(ref, [ref, ref, ref])
    assert rms == 0.0
    assert per == [0.0, 0.0, 0.0]


def test_rms_error_single_run_definition():
    # |ref|_L1 = 1 and |ref - run|_L1 = 0.02 -> RMS = 2.0 percent
    grid = output_grid((-1.0, 1.0))
    ref = _flat(grid, 0.5)
    run = _flat(grid, 0.5 + 0.01)
    rms, per = rms_error(ref, [run])
    assert rms == pytest.approx(2.0, rel=1e-12)
    assert per[0] == pytest.approx(2.0, rel=1e-12)


def test_rms_error_quadratic_mean():
    grid = output_grid((-1.0, 1.0))
    ref = _flat(grid, 0.5)
    runs = [_flat(grid, 0.5 + d) for d in (0.01, -0.03)]
    rms, per = rms_error(ref, runs)
    assert per == [pytest.approx(2.0), pytest.approx(6.0)]
    assert rms == pytest.approx(np.sqrt((4.0 + 36.0) / 2.0))


def test_rms_error_rejects_zero_reference():
    grid = output_grid((-1.0, 1.0))
    with pytest.raises(ZeroReference):
        rms_error(_flat(grid, 0.0), [_flat(grid, 1.0)])


def test_trapezoid_weights_exact_for_affine_integrands():
    nodes, weights = _trapezoid_nodes((-0.3, 0.3), 37)
    assert weights.sum() == pytest.approx(1.0, abs=1e-15)
    # E[a + b*theta] for theta ~ U[-0.3, 0.3] is a
    g = 2.0 + 5.0 * nodes
    assert np.sum(weights * g) == pytest.approx(2.0, abs=1e-13)


def test_trapezoid_degenerate_interval():
    nodes, weights = _trapezoid_nodes((0.1, 0.1), 5)
    assert np.all(nodes == 0.1)
    assert weights.sum() == pytest.approx(1.0)


def test_reference_degenerate_model_equals_single_solve(cfg, tmp_path):
    model = InterfacePositionModel(position_range=(-0.15, -0.15))
    ref = reference_solution(model, 4, 2.0**-6, cfg, cache_dir=tmp_path)
    grid, aligned = build_aligned_grid(model.domain, coefficient_at(model, [-0.15]), 2.0**-6)
    sol = solve(project_initial_datum(model.u0, grid), aligned, cfg)
    expected = project_to_grid(sol.final, output_grid(model.domain)).values
    assert np.max(np.abs(ref.mean.values - expected)) < 1e-13


def test_reference_cache_round_trip(cfg, exp1, tmp_path):
    a = reference_solution(exp1, 5, 2.0**-5, cfg, cache_dir=tmp_path)
    cached = list(tmp_path.glob("reference_*.npz"))
    assert len(cached) == 1
    b = reference_solution(exp1, 5, 2.0**-5, cfg, cache_dir=tmp_path)
    assert np.array_equal(a.mean.values, b.mean.values)
    # different parameters get their own cache entry
    reference_solution(exp1, 6, 2.0**-5, cfg, cache_dir=tmp_path)
    assert len(list(tmp_path.glob("reference_*.npz"))) == 2


def test_reference_quadrature_converges_in_node_count(cfg, exp1, tmp_path):
    # doubling the node count changes the reference by well under 0.1%
    coarse = reference_solution(exp1, 200, 2.0**-8, cfg, cache_dir=tmp_path)
    fine = reference_solution(exp1, 400, 2.0**-8, cfg, cache_dir=tmp_path)
    rel = (
        np.sum(np.abs(coarse.mean.values - fine.mean.values))
        / np.sum(np.abs(fine.mean.values))
    )
    assert rel < 1e-3


def test_reference_rejects_high_dimensions(cfg):
    from mlmcfv import CustomModel

    model = CustomModel(dim=3, box_list=((0, 1),) * 3, interfaces_fn=None)
    with pytest.raises(UnsupportedDimension):
        reference_solution(model, 3, 2.0**-4, cfg)


def test_reference_requires_two_nodes(cfg, exp1):
    with pytest.raises(ConfigError):
        reference_solution(exp1, 1, 2.0**-4, cfg, use_cache=False)


def test_reference_2d_tensor_weights(cfg, exp2, tmp_path):
    ref = reference_solution(exp2, (3, 4), 2.0**-5, cfg, cache_dir=tmp_path)
    assert ref.meta["nodes"] == [3, 4]
    assert 0.3 < l1_norm(ref.mean) < 3.0


def test_convergence_table_smoke(cfg, exp1, tmp_path):
    ref = reference_solution(exp1, 9, 2.0**-7, cfg, cache_dir=tmp_path)
    rows, per_row = convergence_table(
        exp1, 2.0**-4, (1, 2), cfg, ref, replicas=3, master_seed=0
    )
    assert [r.level for r in rows] == [1, 2]
    assert rows[0].dx == 2.0**-5
    assert all(len(per_row[r.level]) == 3 for r in rows)
    assert all(r.rms_percent > 0 for r in rows)
    assert rows[1].cell_updates > rows[0].cell_updates
    # errors shrink when the hierarchy deepens
    assert rows[1].rms_percent < rows[0].rms_percent
