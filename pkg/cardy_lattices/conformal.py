"""Schwarz-Christoffel maps of isosceles triangles and Cardy's prediction.

With prevertices 0, 1 and infinity, the map from the upper half-plane onto
the isosceles triangle with unit base and base angle kappa sends a point `w`
of (0, 1) to the base point `I_w(a, a)` (regularized incomplete beta,
`a = kappa / pi`). The equilateral triangle has `a = 1/3`, so the conformal
image on the equilateral base of a base point `x` is
`X = I_w(1/3, 1/3)` with `w = I^{-1}_x(a, a)`.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special

from cardy_lattices import lattice
from cardy_lattices.errors import DomainError

EQUILATERAL_A = 1 / 3
INVERSE_XTOL = 1e-14
INVERSE_MAXITER = 200
# largest double below 1
BELOW_ONE = float(np.nextafter(1., 0.))

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TriangleMapParams:
    kappa: float
    a: float
    A_norm: float
    a0: float = EQUILATERAL_A
    A2: float = 1 / special.beta(EQUILATERAL_A, EQUILATERAL_A)


@dataclass(frozen=True)
class CardyPrediction:
    x: float
    kappa: float
    w: float
    X: float
    params: TriangleMapParams
    # min(w, 1 - w), exact even where w itself rounds next to 1
    w_tail: float


def triangle_map_params(kappa):
    if not 0 < kappa <= math.pi / 2:
        raise DomainError(f"kappa must lie in (0, pi/2], got {kappa!r}")
    a = kappa / math.pi
    return TriangleMapParams(kappa=kappa, a=a, A_norm=1 / special.beta(a, a))


def _check_a(a):
    if not a > 0:
        raise DomainError(f"the beta exponent must be positive, got {a!r}")


def reg_inc_beta(w, a):
    """`I_w(a, a)`, the base point of the triangle map at prevertex `w`."""
    _check_a(a)
    if not 0 <= w <= 1:
        raise DomainError(f"w must lie in [0, 1], got {w!r}")
    return float(special.betainc(a, a, w))


def map_derivative(w, a):
    """dx/dw = A_norm * w**(a-1) * (1-w)**(a-1)."""
    _check_a(a)
    return (w * (1 - w))**(a - 1) / special.beta(a, a)


def inv_reg_inc_beta(x, a):
    """The unique `w` in (0, 1) with `I_w(a, a) = x`.

    Newton steps on the known derivative, safeguarded by bisection of a
    bracket that always contains the root.
    """
    _check_a(a)
    if not 0 < x < 1:
        raise DomainError(f"x must lie in (0, 1), got {x!r}")
    # the integrand is symmetric about 1/2; 1 - x is exact for x > 1/2
    if x > .5:
        return min(1 - inv_reg_inc_beta(1 - x, a), BELOW_ONE)
    if x == .5:
        return .5

    lo, hi = 0., .5
    # near 0, I_w(a, a) ~ A_norm * w**a / a
    w = min((a * x * special.beta(a, a))**(1 / a), .25)
    for _ in range(INVERSE_MAXITER):
        f = reg_inc_beta(w, a) - x
        if abs(f) <= INVERSE_XTOL * x:
            return w
        if f < 0:
            lo = w
        else:
            hi = w
        w_newton = w - f / map_derivative(w, a)
        w_next = w_newton if lo < w_newton < hi else (lo + hi) / 2
        if abs(w_next - w) <= np.spacing(w):
            return w_next
        w = w_next
    logger.warning("inverse of I_w(%g, %g) did not converge to %g after %d "
                   "iterations", a, a, x, INVERSE_MAXITER)
    return w


def apex_params(k):
    """Base angle kappa of the stretched triangle of the T(k) lattice."""
    if not k > .5:
        raise DomainError(f"apex_params requires k > 1/2, got {k!r}")
    return math.atan(math.sqrt(4 * k * k - 1))


def cardy_prediction(x, kappa):
    if not 0 < x < 1:
        raise DomainError(f"x must lie in (0, 1), got {x!r}")
    if x > .5:
        # mirror of the lower tail, so that w never rounds onto 1
        lower = cardy_prediction(1 - x, kappa)
        return CardyPrediction(x=x,
                               kappa=kappa,
                               w=min(1 - lower.w, BELOW_ONE),
                               X=1 - lower.X,
                               params=lower.params,
                               w_tail=lower.w)
    params = triangle_map_params(kappa)
    w = inv_reg_inc_beta(x, params.a)
    return CardyPrediction(x=x,
                           kappa=kappa,
                           w=w,
                           X=reg_inc_beta(w, EQUILATERAL_A),
                           params=params,
                           w_tail=w)


def residual_38(w, kappa):
    """Ratio of the two map derivatives, dx/dw over dX/dw.

    Identically 1 exactly when kappa = pi/3; otherwise it tends to 0 or
    infinity at the ends of (0, 1).
    """
    if not 0 < w < 1:
        raise DomainError(f"w must lie in (0, 1), got {w!r}")
    params = triangle_map_params(kappa)
    return (params.A_norm * (w * (1 - w))**(params.a - params.a0) /
            params.A2)


def square_ne_prediction(z):
    """Prediction for the SquareNE triangle with Z at distance `z` from 0.

    The -pi/4 rotation takes Z on the diagonal base onto W = d(0, Z) on the
    base of the T(1/sqrt(2)) triangle, whose map to the equilateral triangle
    is then applied.
    """
    if not 0 < z < 1:
        raise DomainError(f"z must lie in (0, 1), got {z!r}")
    w_point = lattice.apply_map(lattice.rotation_map(),
                                np.array([z, z]) * math.sqrt(.5))
    return cardy_prediction(float(w_point[0]),
                            apex_params(lattice.SQUARE_NE_K))


def tabulate(x_values, k_values):
    rows = []
    for k in k_values:
        kappa = apex_params(k)
        for x in x_values:
            prediction = cardy_prediction(x, kappa)
            rows.append({
                'k': k,
                'kappa': kappa,
                'x': x,
                'w': prediction.w,
                'X': prediction.X,
                # symmetric under w -> 1 - w
                'residual': residual_38(prediction.w_tail, kappa)
            })
    return pd.DataFrame(rows,
                        columns=['k', 'kappa', 'x', 'w', 'X', 'residual'])
