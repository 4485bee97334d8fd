import numpy as np
import pytest

from mlmcfv import flux as fx
from mlmcfv.errors import MonotonicityViolation, OutOfMonotoneRange


def test_two_phase_value_pins(bl):
    # lam_o(0) = 0 forces f = 0; lam_w(1) = 0 forces f = 1, for every k
    assert fx.buckley_leverett_value(1.0, 0.0) == 0.0
    assert fx.buckley_leverett_value(1.7, 1.0) == 1.0
    for k in (0.7, 0.9, 1.3, 2.0, 2.3):
        assert bl.eval(k, 0.0) == 0.0
        assert bl.eval(k, 1.0) == 1.0


def test_two_phase_hand_value():
    # k=2, u=0.5: lam_o = lam_w = 0.25, ratio 1/2, (1 - 2*0.25) = 0.5 -> 0.25
    assert fx.buckley_leverett_value(2.0, 0.5) == 0.25


def test_two_phase_nonmonotone_near_zero():
    # direct evaluation: for k=2.3 the flux decreases between u=0.1 and u=0.2
    assert fx.buckley_leverett_value(2.3, 0.1) == pytest.approx(-0.0105243902, abs=1e-9)
    assert fx.buckley_leverett_value(2.3, 0.2) == pytest.approx(-0.0277647058, abs=1e-9)
    assert fx.buckley_leverett_value(2.3, 0.1) > fx.buckley_leverett_value(2.3, 0.2)


def test_derivative_against_finite_differences():
    rng = np.random.default_rng(7)
    k = rng.uniform(0.7, 2.3, 300)
    u = rng.uniform(0.05, 0.95, 300)
    h = 1e-6
    fd = (fx.buckley_leverett_value(k, u + h) - fx.buckley_leverett_value(k, u - h)) / (2 * h)
    assert np.max(np.abs(fd - fx.buckley_leverett_deriv(k, u))) < 1e-7


def test_default_bracket_validates(bl):
    dmin, dmax = fx.validate_monotone_bracket(bl)
    assert dmin > 0.0
    assert dmax < 5.0
    assert bl.deriv_min == dmin
    assert bl.deriv_max == dmax


def test_bracket_near_zero_is_rejected():
    with pytest.raises(MonotonicityViolation):
        fx.buckley_leverett(k_range=(2.0, 2.3), bracket=(0.0, 0.2))


def test_linear_flux_constant_derivative():
    lin = fx.linear_flux()
    assert (lin.deriv_min, lin.deriv_max) == (1.0, 1.0)


def test_invert_round_trips(bl):
    for k, u in [(1.5, 0.6), (0.7, 0.41), (2.3, 0.88), (1.0, 0.35)]:
        assert bl.invert(k, bl.eval(k, u)) == pytest.approx(u, abs=1e-10)


def test_invert_hand_value(bl):
    assert bl.invert(2.0, 0.25) == pytest.approx(0.5, abs=1e-10)


def test_invert_at_full_saturation():
    # f(k, 1) = 1 for every k; needs a bracket reaching u = 1, where df/du -> 0,
    # so the model is built without the positivity validation
    wide = fx.FluxModel(
        name="bl_wide",
        value_fn=fx.buckley_leverett_value,
        deriv_fn=fx.buckley_leverett_deriv,
        bracket=(0.35, 1.0),
        k_range=(0.7, 2.3),
        deriv_min=0.0,
        deriv_max=2.4,
    )
    u = wide.invert(0.9, 1.0)
    assert abs(u - 1.0) < 1e-5
    assert abs(fx.buckley_leverett_value(0.9, u) - 1.0) <= fx.FLUX_TOL


def test_invert_rejects_out_of_image(bl):
    hi_image = bl.eval(1.2, bl.bracket[1])
    with pytest.raises(OutOfMonotoneRange):
        bl.invert(1.2, hi_image + 1e-3)
    with pytest.raises(OutOfMonotoneRange):
        bl.invert(1.2, bl.eval(1.2, bl.bracket[0]) - 1e-3)


def test_invert_is_monotone(bl):
    rng = np.random.default_rng(11)
    k = 1.8
    lo, hi = bl.eval(k, bl.bracket[0]), bl.eval(k, bl.bracket[1])
    p = np.sort(rng.uniform(lo, hi, 200))
    u = bl.invert(k, p)
    assert np.all(np.diff(u) >= 0.0)


def test_invert_vectorized_matches_scalar(bl):
    rng = np.random.default_rng(3)
    k = rng.uniform(0.7, 2.3, 50)
    u = rng.uniform(0.36, 0.89, 50)
    p = bl.eval(k, u)
    batch = bl.invert(k, p)
    single = np.array([bl.invert(float(ki), float(pi)) for ki, pi in zip(k, p)])
    assert np.array_equal(batch, single)


def test_round_trip_tolerance_scales_with_derivative(bl):
    # |invert(eval(u)) - u| <= tol_f / deriv_min
    rng = np.random.default_rng(5)
    u = rng.uniform(bl.bracket[0], bl.bracket[1], 500)
    k = rng.uniform(*bl.k_range, 500)
    back = bl.invert(k, bl.eval(k, u))
    assert np.max(np.abs(back - u)) <= fx.FLUX_TOL / bl.deriv_min
