"""Flux models: evaluation, u-derivative, and monotone inversion.

Coefficient interfaces are coupled by inverting the downstream flux at the
upstream flux value, so every model carries a bracket [u_min, u_max] on which
u -> f(k, u) has been *checked* to be strictly increasing for all admissible
coefficient values k.  The two-phase (Buckley-Leverett style) flux used in the
experiments is only monotone on such a restricted invariant region.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MonotonicityViolation, NumericalError, OutOfMonotoneRange

# Inversion tolerance in flux value, and the fixed iteration counts of the
# bracketed bisection / Newton-polish inversion.  Fixed counts keep the
# arithmetic independent of how samples are batched.
FLUX_TOL = 1e-12
BISECT_ITERS = 20
NEWTON_ITERS = 3

# Kernel ids understood by the compiled time stepper (solver module).
KERNEL_BUCKLEY_LEVERETT = 0
KERNEL_LINEAR = 1

DEFAULT_K_RANGE = (0.7, 2.3)
DEFAULT_BRACKET = (0.35, 0.9)


def buckley_leverett_value(k, u):
    """f(k,u) = [lam_o/(lam_o+lam_w)] * (1 - k*lam_w) with lam_o=u^2, lam_w=(1-u)^2."""
    k = np.asarray(k, dtype=float)
    u = np.asarray(u, dtype=float)
    a = u * u
    b = (1.0 - u) * (1.0 - u)
    return a * (1.0 - k * b) / (a + b)


def buckley_leverett_deriv(k, u):
    """Closed-form d/du of ``buckley_leverett_value``."""
    k = np.asarray(k, dtype=float)
    u = np.asarray(u, dtype=float)
    a = u * u
    b = (1.0 - u) * (1.0 - u)
    den = a + b
    num = a * (1.0 - k * b)
    dnum = 2.0 * u * (1.0 - k * b) + 2.0 * a * k * (1.0 - u)
    dden = 4.0 * u - 2.0
    return (dnum * den - num * dden) / (den * den)


def linear_value(k, u):
    """Coefficient-independent transport flux f(k,u) = u."""
    k = np.asarray(k, dtype=float)
    u = np.asarray(u, dtype=float)
    return u + 0.0 * k


def linear_deriv(k, u):
    k = np.asarray(k, dtype=float)
    u = np.asarray(u, dtype=float)
    return np.ones_like(u + 0.0 * k)


@dataclass(frozen=True)
class FluxModel:
    """A flux f(k, u) with derivative, monotone bracket, and derivative bounds.

    deriv_min/deriv_max are the measured minimum/maximum of df/du over
    bracket x k_range; deriv_min > 0 is what makes the inversion well posed,
    deriv_max enters the CFL constraint.
    """

    name: str
    value_fn: callable
    deriv_fn: callable
    bracket: tuple
    k_range: tuple
    deriv_min: float
    deriv_max: float
    kernel_id: int | None = None

    def eval(self, k, u):
        return self.value_fn(k, u)

    def derivative(self, k, u):
        return self.deriv_fn(k, u)

    def invert(self, k, p, tol=FLUX_TOL):
        """Solve f(k, u) = p for u in the monotone bracket.

        Bracketed bisection down to ~1e-7 followed by a clamped Newton polish;
        the result satisfies |f(k,u) - p| <= tol.  Raises OutOfMonotoneRange
        when p is not in the image of the bracket.
        """
        k_arr = np.atleast_1d(np.asarray(k, dtype=float))
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        k_arr, p_arr = np.broadcast_arrays(k_arr, p_arr)
        lo_b, hi_b = self.bracket

        lo = np.full(p_arr.shape, lo_b)
        hi = np.full(p_arr.shape, hi_b)
        f_lo = self.value_fn(k_arr, lo)
        f_hi = self.value_fn(k_arr, hi)
        bad = (p_arr < f_lo - tol) | (p_arr > f_hi + tol)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise OutOfMonotoneRange(
                f"flux value {p_arr.flat[i]:.6g} outside image "
                f"[{f_lo.flat[i]:.6g}, {f_hi.flat[i]:.6g}] of bracket "
                f"{self.bracket} at k={k_arr.flat[i]:.6g}"
            )

        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            below = self.value_fn(k_arr, mid) < p_arr
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        u = 0.5 * (lo + hi)
        for _ in range(NEWTON_ITERS):
            u = u - (self.value_fn(k_arr, u) - p_arr) / self.deriv_fn(k_arr, u)
            u = np.clip(u, lo_b, hi_b)

        resid = np.abs(self.value_fn(k_arr, u) - p_arr)
        if np.any(resid > tol):
            i = int(np.argmax(resid))
            raise NumericalError(
                f"flux inversion residual {resid.flat[i]:.3g} exceeds {tol:.3g}"
            )
        if np.ndim(p) == 0 and np.ndim(k) == 0:
            return float(u[0])
        return u


def validate_monotone_bracket(model, k_range=None, bracket=None, n_check=512):
    """Measure (deriv_min, deriv_max) of df/du over a tensor grid on k_range x bracket.

    Raises MonotonicityViolation if the minimum is not strictly positive or if
    the sampled flux values fail to increase along u for some k.
    """
    if n_check < 2:
        raise ValueError("n_check must be at least 2 per axis")
    k_range = model.k_range if k_range is None else k_range
    bracket = model.bracket if bracket is None else bracket
    ks = np.linspace(k_range[0], k_range[1], n_check)
    us = np.linspace(bracket[0], bracket[1], n_check)
    kk, uu = np.meshgrid(ks, us, indexing="ij")
    d = model.deriv_fn(kk, uu)
    dmin = float(np.min(d))
    dmax = float(np.max(d))
    if dmin <= 0.0:
        i, j = np.unravel_index(int(np.argmin(d)), d.shape)
        raise MonotonicityViolation(
            f"df/du = {dmin:.6g} <= 0 at k={ks[i]:.6g}, u={us[j]:.6g}; "
            f"bracket {tuple(bracket)} is not monotone on k range {tuple(k_range)}"
        )
    f = model.value_fn(kk, uu)
    if not np.all(np.diff(f, axis=1) > 0.0):
        raise MonotonicityViolation(
            f"sampled flux values are not strictly increasing on bracket {tuple(bracket)}"
        )
    return dmin, dmax


def _build(name, value_fn, deriv_fn, k_range, bracket, kernel_id, n_check):
    probe = FluxModel(
        name=name,
        value_fn=value_fn,
        deriv_fn=deriv_fn,
        bracket=tuple(float(v) for v in bracket),
        k_range=tuple(float(v) for v in k_range),
        deriv_min=np.nan,
        deriv_max=np.nan,
        kernel_id=kernel_id,
    )
    dmin, dmax = validate_monotone_bracket(probe, n_check=n_check)
    return FluxModel(
        name=name,
        value_fn=value_fn,
        deriv_fn=deriv_fn,
        bracket=probe.bracket,
        k_range=probe.k_range,
        deriv_min=dmin,
        deriv_max=dmax,
        kernel_id=kernel_id,
    )


def buckley_leverett(k_range=DEFAULT_K_RANGE, bracket=DEFAULT_BRACKET, n_check=512):
    """Two-phase flow flux with absolute permeability k as the coefficient.

    The default bracket [0.35, 0.9] encloses the experiments' invariant region
    [0.4, 0.8] with margin; the flux is *not* monotone near u = 0 for k > 1,
    so validation on the configured region is mandatory rather than cosmetic.
    """
    return _build(
        "buckley_leverett",
        buckley_leverett_value,
        buckley_leverett_deriv,
        k_range,
        bracket,
        KERNEL_BUCKLEY_LEVERETT,
        n_check,
    )


def linear_flux(k_range=(0.0, 1.0), bracket=(0.0, 1.0), n_check=2):
    """f(k,u) = u; handy as an exactly solvable reference case in tests."""
    return _build(
        "linear", linear_value, linear_deriv, k_range, bracket, KERNEL_LINEAR, n_check
    )


def eval_flux(model, k, u):
    return model.eval(k, u)


def invert_flux(model, k, p, tol=FLUX_TOL):
    return model.invert(k, p, tol=tol)
