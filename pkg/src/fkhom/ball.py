"""Closed-form principal-eigenvalue data for disks and abar-ellipsoids (d = 2).

For the unit disk, lambda_1(B_1, id) = j_{0,1}^2 with ground state
c J_0(j_{0,1} r), c = 1/(sqrt(pi) J_1(j_{0,1})).  For an ellipsoid
E = center + abar^(1/2) B_rho the substitution y = abar^(-1/2)(x - center)
turns the abar-form into the Dirichlet integral, so

    lambda_1(E, abar) = lambda_1(B_rho, id) = j_{0,1}^2 / rho^2,

and |E| = det(abar)^(1/2) pi rho^2.  The ground state of E is the disk ground
state composed with the same substitution, renormalized by det(abar)^(-1/4).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import j0, j1, jn_zeros

from .masks import inv_2x2

J01 = float(jn_zeros(0, 1)[0])
LAMBDA_BALL = J01 * J01          # lambda_1(B_1, id)
BALL_MEASURE = math.pi           # |B_1|
_C_BALL = 1.0 / (math.sqrt(math.pi) * float(j1(J01)))  # L2-normalizer on B_1


def lambda1_ellipsoid(abar, volume):
    """lambda_1(E, abar) for the abar-ellipsoid of the given volume."""
    A = np.asarray(abar, dtype=float)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if det <= 0 or volume <= 0:
        raise ValueError(f"need SPD abar and positive volume, got det={det}")
    # rho^2 = volume / (pi sqrt(det))
    return LAMBDA_BALL * math.pi * math.sqrt(det) / volume


def ball_boundary_slope():
    """|grad u| on the boundary of the unit disk's normalized ground state:
    sqrt((2/(d |B_1|)) lambda_1(B_1, id)) = j_{0,1}/sqrt(pi)."""
    return J01 / math.sqrt(math.pi)


def ball_interior_max_slope():
    """max over B_1 of |grad u| (attained inside, at the max of J_1)."""
    r = np.linspace(0.0, 1.0, 20001)
    return _C_BALL * J01 * float(np.max(np.abs(j1(J01 * r))))


def ellipsoid_ground_state(ell):
    """(u, grad_u) callables for the normalized ground state of an ellipsoid.

    u(x) = det(abar)^(-1/4) c J_0(j s(x)), s = |abar^(-1/2)(x-c)| / rho,
    extended by zero outside E; grad_u returns the two components.
    """
    Si = inv_2x2(ell.sqrt_abar)          # abar^(-1/2)
    det_quarter = math.sqrt(ell.det_sqrt_abar)   # det(abar)^(1/4)
    rho = ell.rho
    amp = _C_BALL / (det_quarter * rho)  # normalizes over E

    def _coords(x, y):
        dx = np.asarray(x, float) - ell.center[0]
        dy = np.asarray(y, float) - ell.center[1]
        u = Si[0, 0] * dx + Si[0, 1] * dy
        v = Si[1, 0] * dx + Si[1, 1] * dy
        return u, v

    def u_fun(x, y):
        yu, yv = _coords(x, y)
        r = np.sqrt(yu * yu + yv * yv)
        out = amp * j0(J01 * r / rho)
        return np.where(r < rho, out, 0.0)

    def grad_fun(x, y):
        yu, yv = _coords(x, y)
        r = np.sqrt(yu * yu + yv * yv)
        inside = r < rho
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = -amp * (J01 / rho) * j1(J01 * r / rho)
            ux = np.where(inside & (r > 0), radial * yu / r, 0.0)
            uy = np.where(inside & (r > 0), radial * yv / r, 0.0)
        # chain rule through y = abar^(-1/2)(x - c); Si is symmetric
        gx = Si[0, 0] * ux + Si[1, 0] * uy
        gy = Si[0, 1] * ux + Si[1, 1] * uy
        return gx, gy

    return u_fun, grad_fun
