"""Periodic cell problems: correctors and the homogenized tensor.

For each coordinate direction q the corrector chi_q is the mean-zero periodic
solution of

    -div( a(x) (q + grad chi_q) ) = 0   on the unit torus,

discretized by the 5-point flux scheme (face-sampled coefficients) and solved
with Jacobi-preconditioned conjugate gradients, projecting out the mean every
iteration (the torus operator has the constants as nullspace).  The
homogenized tensor is the energy average

    abar_ij = < (e_i + grad chi_i) . a (e_j + grad chi_j) >,

assembled from the same face quantities, so the discrete energy identity
(perturbing chi can only increase the form) holds to solver precision.

Constant fields short-circuit: chi = 0 and abar = M exactly, off-diagonal
entries included.  Variable fields must be grid-aligned (diagonal); every
built-in non-constant kind is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import eigsolve
from .ball import ellipsoid_ground_state, lambda1_ellipsoid
from .errors import (
    ConfigError,
    InternalInconsistencyError,
    SolverError,
)
from .masks import GridWindow, rasterize_ellipsoid, sym_sqrt_2x2


def _torus_faces(field, n):
    """Periodic face coefficients on the n x n unit cell:
    ax[iy, ix] at (ix h, (iy+0.5) h), ay[iy, ix] at ((ix+0.5) h, iy h)."""
    w = GridWindow(nx=n, ny=n, h=1.0 / n)
    ax, ay = field.face_components(w)
    return ax[:, :n].copy(), ay[:n, :].copy()


def _apply_operator(ax, ay, h, u):
    """-div(a grad u) on the torus, 5-point flux form."""
    gx = (u - np.roll(u, 1, axis=1)) / h
    gy = (u - np.roll(u, 1, axis=0)) / h
    fx = ax * gx
    fy = ay * gy
    div = (np.roll(fx, -1, axis=1) - fx) / h + (np.roll(fy, -1, axis=0) - fy) / h
    return -div


def _pcg_mean_zero(ax, ay, h, b, tol, max_iter):
    """Jacobi-PCG on the mean-zero subspace; projects the residual and the
    preconditioned direction every iteration."""
    diag = (ax + np.roll(ax, -1, axis=1) + ay + np.roll(ay, -1, axis=0)) / h**2
    b = b - b.mean()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0
    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    z -= z.mean()
    p = z.copy()
    rz = float(np.sum(r * z))
    for _ in range(max_iter):
        Ap = _apply_operator(ax, ay, h, p)
        alpha = rz / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        r -= r.mean()
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm:
            break
        z = r / diag
        z -= z.mean()
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        raise SolverError(
            f"corrector CG did not reach tol {tol} in {max_iter} iterations "
            f"(relative residual {rnorm / bnorm:.3e})"
        )
    x -= x.mean()
    return x, rnorm / bnorm


@dataclass(frozen=True)
class CorrectorSet:
    """chi[k] is the corrector for direction e_k on the n x n torus grid."""

    chi: np.ndarray            # (2, n, n), indexed [k, iy, ix]
    residual_norms: np.ndarray  # (2,)
    n: int

    @property
    def h(self):
        return 1.0 / self.n

    def sample(self, x, y):
        """Periodic bilinear interpolation of both correctors at points."""
        n, h = self.n, self.h
        fx = np.mod(np.asarray(x, float), 1.0) / h - 0.5
        fy = np.mod(np.asarray(y, float), 1.0) / h - 0.5
        ix0 = np.floor(fx).astype(int)
        iy0 = np.floor(fy).astype(int)
        tx = fx - ix0
        ty = fy - iy0
        ix0 = np.mod(ix0, n)
        iy0 = np.mod(iy0, n)
        ix1 = np.mod(ix0 + 1, n)
        iy1 = np.mod(iy0 + 1, n)
        out = []
        for k in range(2):
            c = self.chi[k]
            v = (c[iy0, ix0] * (1 - tx) * (1 - ty)
                 + c[iy0, ix1] * tx * (1 - ty)
                 + c[iy1, ix0] * (1 - tx) * ty
                 + c[iy1, ix1] * tx * ty)
            out.append(v)
        return out[0], out[1]


def solve_correctors(field, n=None, tol=1e-10, max_iter=50000):
    """Solve both corrector problems; mean-zero to 1e-10, residuals recorded."""
    n = int(n) if n is not None else field.cells_per_period
    if n < 4:
        raise ConfigError(f"torus grid needs n >= 4, got {n}")
    if field.is_constant:
        return CorrectorSet(chi=np.zeros((2, n, n)),
                            residual_norms=np.zeros(2), n=n)
    h = 1.0 / n
    ax, ay = _torus_faces(field, n)
    chis = np.zeros((2, n, n))
    residuals = np.zeros(2)
    for k, q in enumerate(((1.0, 0.0), (0.0, 1.0))):
        # rhs = div(a q) at cells
        fx = ax * q[0]
        fy = ay * q[1]
        b = (np.roll(fx, -1, axis=1) - fx) / h + (np.roll(fy, -1, axis=0) - fy) / h
        chi, res = _pcg_mean_zero(ax, ay, h, b, tol, max_iter)
        if abs(chi.mean()) > 1e-10:
            raise InternalInconsistencyError(
                f"corrector mean {chi.mean():.3e} exceeds 1e-10"
            )
        chis[k] = chi
        residuals[k] = res
    return CorrectorSet(chi=chis, residual_norms=residuals, n=n)


@dataclass(frozen=True)
class HomogenizedTensor:
    """Constant effective tensor with certified symmetry and a closed-form
    square root; behaves as a constant coefficient in eigensolves."""

    abar: np.ndarray
    sqrt_abar: np.ndarray
    det_abar: float
    skew_discrepancy: float = 0.0

    @classmethod
    def from_matrix(cls, M, skew=0.0):
        M = 0.5 * (np.asarray(M, float) + np.asarray(M, float).T)
        S = sym_sqrt_2x2(M)
        if np.max(np.abs(S @ S - M)) > 1e-10 * max(1.0, float(np.max(np.abs(M)))):
            raise InternalInconsistencyError("sqrt_abar failed to reproduce abar")
        det = float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
        return cls(abar=M, sqrt_abar=S, det_abar=det, skew_discrepancy=skew)

    @property
    def matrix(self):
        return self.abar

    @property
    def is_constant(self):
        return True


def _energy_form(field, correctors, p, q, chi_p, chi_q):
    """<(e_p + grad chi_p) . a (e_q + grad chi_q)> on the torus faces."""
    n = correctors.n
    h = correctors.h
    ax, ay = _torus_faces(field, n)
    gx_p = (chi_p - np.roll(chi_p, 1, axis=1)) / h + (1.0 if p == 0 else 0.0)
    gy_p = (chi_p - np.roll(chi_p, 1, axis=0)) / h + (1.0 if p == 1 else 0.0)
    gx_q = (chi_q - np.roll(chi_q, 1, axis=1)) / h + (1.0 if q == 0 else 0.0)
    gy_q = (chi_q - np.roll(chi_q, 1, axis=0)) / h + (1.0 if q == 1 else 0.0)
    return float(np.mean(ax * gx_p * gx_q) + np.mean(ay * gy_p * gy_q))


def homogenize(field, correctors=None, lambda_tol=1e-6):
    """Assemble the homogenized tensor from the corrector energies.

    Eigenvalues are certified to lie within the field's ellipticity band
    [1/Lambda, Lambda] up to lambda_tol; symmetry is enforced by averaging
    with the transpose and the discrepancy recorded.
    """
    if field.is_constant:
        return HomogenizedTensor.from_matrix(field.matrix)
    if correctors is None:
        correctors = solve_correctors(field)
    A = np.empty((2, 2))
    for p in range(2):
        for q in range(p, 2):
            A[p, q] = _energy_form(field, correctors, p, q,
                                   correctors.chi[p], correctors.chi[q])
            A[q, p] = A[p, q]
    # the form is symmetric by construction; still measure the discrepancy
    # between the two off-diagonal energy evaluations
    a01 = _energy_form(field, correctors, 0, 1,
                       correctors.chi[0], correctors.chi[1])
    a10 = _energy_form(field, correctors, 1, 0,
                       correctors.chi[1], correctors.chi[0])
    skew = abs(a01 - a10)
    M = 0.5 * (A + A.T)
    M[0, 1] = M[1, 0] = 0.5 * (a01 + a10)
    lam = field.lambda_ell
    evals = np.linalg.eigvalsh(M)
    if evals[0] < 1.0 / lam - lambda_tol or evals[1] > lam + lambda_tol:
        raise InternalInconsistencyError(
            f"homogenized eigenvalues {evals} leave [{1/lam:.6g}, {lam:.6g}]"
        )
    return HomogenizedTensor.from_matrix(M, skew=skew)


def directional_energy(field, correctors, q1, q2):
    """Energy form for arbitrary constant directions (chi_q by linearity)."""
    q1 = np.asarray(q1, float)
    q2 = np.asarray(q2, float)
    chi_q1 = q1[0] * correctors.chi[0] + q1[1] * correctors.chi[1]
    chi_q2 = q2[0] * correctors.chi[0] + q2[1] * correctors.chi[1]
    n, h = correctors.n, correctors.h
    ax, ay = _torus_faces(field, n)
    gx1 = (chi_q1 - np.roll(chi_q1, 1, axis=1)) / h + q1[0]
    gy1 = (chi_q1 - np.roll(chi_q1, 1, axis=0)) / h + q1[1]
    gx2 = (chi_q2 - np.roll(chi_q2, 1, axis=1)) / h + q2[0]
    gy2 = (chi_q2 - np.roll(chi_q2, 1, axis=0)) / h + q2[1]
    return float(np.mean(ax * gx1 * gx2) + np.mean(ay * gy1 * gy2))


# ---------------------------------------------------------------------------
# corrector-corrected trial field on an ellipsoid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialReport:
    xi: np.ndarray          # grid values on the window, zero outside the mask
    mask: object            # rasterized ellipsoid (DomainMask)
    rayleigh: float
    lambda_ref: float       # lambda_1(E, abar), closed form
    excess: float           # rayleigh / lambda_ref - 1
    excess_const: float     # excess * |E|^(1/4)
    t: float


def corrected_trial(ellipsoid, abar, correctors, field, t=None, h=None,
                    margin=1.0):
    """Two-scale trial field xi = u_E + zeta (grad u_E . chi) on a raster of E.

    u_E is the closed-form ground state of (E, abar); chi are the periodic
    correctors of the oscillatory field; zeta is 1 on the (1-t)-dilate of E,
    0 outside E, and linear in the elliptical radius between.  The fraction t
    defaults to |E|^(-1/4), the volume scaling that balances the cutoff layer
    against the corrector oscillation.  Returns the discrete Rayleigh quotient
    of xi in the oscillatory field against the closed-form lambda_1(E, abar).
    """
    A = abar.matrix if hasattr(abar, "matrix") else np.asarray(abar, dtype=float)
    if not np.allclose(A, ellipsoid.abar, rtol=1e-8, atol=1e-10):
        raise ConfigError(
            "corrected_trial: abar disagrees with the tensor the ellipsoid "
            "was built from; the trial field is only valid for matching pairs"
        )
    volume = ellipsoid.volume
    if t is None:
        t = volume ** (-0.25)
    if not 0.0 < t < 1.0:
        raise ConfigError(f"cutoff fraction t must lie in (0, 1), got {t}")
    if h is None:
        h = correctors.h

    ext = ellipsoid.semi_extent()
    c = ellipsoid.center
    window = GridWindow.covering(
        c[0] - ext[0] - margin, c[0] + ext[0] + margin,
        c[1] - ext[1] - margin, c[1] + ext[1] + margin, h,
    )
    mask = rasterize_ellipsoid(ellipsoid, window)
    X, Y = window.center_mesh()

    u_fun, grad_fun = ellipsoid_ground_state(ellipsoid)
    u = u_fun(X, Y)
    gx, gy = grad_fun(X, Y)
    chi1, chi2 = correctors.sample(X, Y)

    s = ellipsoid.radial(X, Y)
    zeta = np.clip((1.0 - s) / t, 0.0, 1.0)

    xi = u + zeta * (gx * chi1 + gy * chi2)
    xi = np.where(mask.occ, xi, 0.0)

    ray = eigsolve.rayleigh_quotient(field, mask, xi)
    lam_ref = lambda1_ellipsoid(ellipsoid.abar, volume)
    excess = ray / lam_ref - 1.0
    return TrialReport(
        xi=xi, mask=mask, rayleigh=float(ray), lambda_ref=float(lam_ref),
        excess=float(excess), excess_const=float(excess * volume**0.25),
        t=float(t),
    )
