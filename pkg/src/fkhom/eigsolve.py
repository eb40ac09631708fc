"""Principal Dirichlet eigenvalues on occupancy masks.

The operator -div(a grad .) is discretized by the 5-point flux scheme with
face-sampled coefficients.  Dirichlet data is imposed by ghost reflection at
boundary faces: a face between an occupied and an unoccupied cell pins the
trace to zero *at the face*, contributing 2 a_f / h^2 to the diagonal.  On
grid-aligned boundaries this is second-order accurate (the effective domain
is exactly the union of occupied cells); on staircase boundaries it is
first-order, which is the resolution limit of the masks themselves.

Eigenpairs come from shift-invert Lanczos at sigma = 0 (sparse LU inside)
with a dense fallback for tiny masks, followed by a couple of inverse-power
polish steps reusing the factorization.  The ground state is normalized to
h^2 sum u^2 = 1 and sign-fixed per connected component, so u >= 0 holds up
to solver tolerance everywhere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.linalg import eigh as dense_eigh
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .errors import (
    ConfigError,
    DegenerateGapWarning,
    EllipticityError,
    EmptyMaskError,
    InternalInconsistencyError,
    SolverError,
    WindowError,
)

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

DENSE_CUTOFF = 400


def _constant_diagonal(coeff):
    """(a11, a22) if coeff acts as a constant grid-aligned tensor, else None."""
    M = None
    if isinstance(coeff, np.ndarray):
        M = np.asarray(coeff, dtype=float)
    elif hasattr(coeff, "abar"):
        M = np.asarray(coeff.abar, dtype=float)
    elif getattr(coeff, "is_constant", False):
        M = coeff.matrix
    if M is None:
        return None
    if M.shape != (2, 2):
        raise ConfigError(f"constant coefficient must be 2x2, got {M.shape}")
    if abs(M[0, 1]) > 1e-8 * (abs(M[0, 0]) + abs(M[1, 1])):
        raise EllipticityError(
            "masked eigensolves support grid-aligned tensors only; "
            f"off-diagonal entry {M[0, 1]} is not negligible"
        )
    if min(M[0, 0], M[1, 1]) <= 0:
        raise EllipticityError(f"constant tensor not positive: {M.tolist()}")
    return float(M[0, 0]), float(M[1, 1])


def _face_arrays(coeff, window):
    cd = _constant_diagonal(coeff)
    if cd is not None:
        a11, a22 = cd
        ax = np.full((window.ny, window.nx + 1), a11)
        ay = np.full((window.ny + 1, window.nx), a22)
        return ax, ay
    return coeff.face_components(window)


def assemble_operator(coeff, mask):
    """Sparse SPD matrix on occupied cells plus the index map (ny, nx)->row."""
    mask.require_nonempty("eigen domain")
    occ = mask.occ
    ny, nx = occ.shape
    h = mask.window.h
    ax, ay = _face_arrays(coeff, mask.window)

    idx = np.full(occ.shape, -1, dtype=np.int64)
    idx[occ] = np.arange(mask.count)

    occ_px = np.zeros((ny, nx + 2), dtype=bool)
    occ_px[:, 1:-1] = occ
    idx_px = np.full((ny, nx + 2), -1, dtype=np.int64)
    idx_px[:, 1:-1] = idx
    occ_py = np.zeros((ny + 2, nx), dtype=bool)
    occ_py[1:-1, :] = occ
    idx_py = np.full((ny + 2, nx), -1, dtype=np.int64)
    idx_py[1:-1, :] = idx

    rows, cols, vals = [], [], []
    diag = np.zeros(mask.count)
    inv_h2 = 1.0 / (h * h)

    for (af, occL, occR, idxL, idxR) in (
        (ax, occ_px[:, :-1], occ_px[:, 1:], idx_px[:, :-1], idx_px[:, 1:]),
        (ay, occ_py[:-1, :], occ_py[1:, :], idx_py[:-1, :], idx_py[1:, :]),
    ):
        both = occL & occR
        iL, iR = idxL[both], idxR[both]
        a = af[both] * inv_h2
        rows.append(iL)
        cols.append(iR)
        vals.append(-a)
        rows.append(iR)
        cols.append(iL)
        vals.append(-a)
        np.add.at(diag, iL, a)
        np.add.at(diag, iR, a)
        ghostL = occL & ~occR
        np.add.at(diag, idxL[ghostL], 2.0 * af[ghostL] * inv_h2)
        ghostR = occR & ~occL
        np.add.at(diag, idxR[ghostR], 2.0 * af[ghostR] * inv_h2)

    n = mask.count
    A = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    A = A + sparse.diags(diag)
    return A, idx


@dataclass(frozen=True)
class EigenResult:
    lambda1: float
    lambda2: float | None
    u: np.ndarray            # grid (ny, nx), zero outside the mask
    u2: np.ndarray | None
    residual: float
    iterations: int
    mask: object


def _to_grid(mask, vec):
    out = np.zeros(mask.occ.shape)
    out[mask.occ] = vec
    return out


def _component_sign_fix(mask, vec):
    """Flip the sign per connected component so each sums positive."""
    labels, nlab = ndimage.label(mask.occ, structure=_CROSS)
    if nlab <= 1:
        return vec if vec.sum() >= 0 else -vec
    lab_vec = labels[mask.occ]
    out = vec.copy()
    for l in range(1, nlab + 1):
        sel = lab_vec == l
        if out[sel].sum() < 0:
            out[sel] = -out[sel]
    return out


def eigen(coeff, mask, k=1, tol=1e-10, v0=None, max_iter=20000,
          dense_cutoff=None):
    """First k in {1, 2} Dirichlet eigenpairs of -div(a grad .) on the mask.

    The ground state u is componentwise nonnegative (certified up to solver
    tolerance) and normalized so h^2 sum u^2 = 1.  ``residual`` is the max
    over computed pairs of |A v - lambda v| / (lambda |v|); ``iterations``
    counts inner factorized solves.
    """
    if k not in (1, 2):
        raise ConfigError(f"k must be 1 or 2, got {k}")
    mask.require_nonempty("eigen domain")
    if mask.count <= k:
        raise EmptyMaskError(
            f"mask with {mask.count} cells cannot resolve {k} eigenpairs"
        )
    A, _ = assemble_operator(coeff, mask)
    n = A.shape[0]
    h = mask.window.h
    iterations = 0

    if dense_cutoff is None:
        dense_cutoff = DENSE_CUTOFF
    if n <= dense_cutoff:
        vals, vecs = dense_eigh(A.toarray())
        vals, vecs = vals[:k], vecs[:, :k]
        iterations = 1
        solve = None
    else:
        lu = splu(A.tocsc())
        counter = [0]

        def _solve(b):
            counter[0] += 1
            return lu.solve(b)

        opinv = LinearOperator(A.shape, matvec=_solve, dtype=float)
        if v0 is not None:
            v0 = np.asarray(v0, float)
            if v0.shape != (n,) or not np.any(v0):
                v0 = None
        try:
            vals, vecs = eigsh(A, k=k, sigma=0.0, which="LM", OPinv=opinv,
                               v0=v0, tol=tol, maxiter=max_iter)
        except Exception as e:  # ARPACK breakdowns surface as SolverError
            raise SolverError(f"eigensolve failed on {n} unknowns: {e}") from e
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        solve = _solve
        iterations = counter[0]

    # inverse-power polish (reuses the factorization), then re-Rayleigh
    if solve is not None:
        w = vecs[:, 0]
        for _ in range(2):
            w = solve(w)
            w /= np.linalg.norm(w)
        vecs[:, 0] = w
        vals[0] = float(w @ (A @ w))
        if k == 2:
            w2 = vecs[:, 1]
            for _ in range(2):
                w2 = solve(w2)
                w2 -= (w @ w2) * w
                w2 /= np.linalg.norm(w2)
            vecs[:, 1] = w2
            vals[1] = float(w2 @ (A @ w2))

    if vals[0] <= 0:
        raise InternalInconsistencyError(
            f"nonpositive principal eigenvalue {vals[0]}"
        )

    residual = 0.0
    for i in range(k):
        v = vecs[:, i]
        residual = max(residual, float(
            np.linalg.norm(A @ v - vals[i] * v)
            / (abs(vals[i]) * np.linalg.norm(v))
        ))
    if residual > max(1e-7, 100 * tol):
        raise SolverError(f"eigen residual {residual:.3e} above tolerance")

    u_vec = _component_sign_fix(mask, vecs[:, 0])
    u_vec = u_vec / (h * np.linalg.norm(u_vec))
    neg = float(u_vec.min())
    if neg < -1e-6 * float(u_vec.max()):
        raise InternalInconsistencyError(
            f"ground state has a negative part ({neg:.3e} vs max "
            f"{u_vec.max():.3e})"
        )

    u2_grid = None
    lam2 = None
    if k == 2:
        v2 = vecs[:, 1]
        if v2[np.argmax(np.abs(v2))] < 0:
            v2 = -v2
        v2 = v2 / (h * np.linalg.norm(v2))
        u2_grid = _to_grid(mask, v2)
        lam2 = float(vals[1])

    return EigenResult(
        lambda1=float(vals[0]),
        lambda2=lam2,
        u=_to_grid(mask, u_vec),
        u2=u2_grid,
        residual=residual,
        iterations=int(iterations),
        mask=mask,
    )


def rayleigh_quotient(coeff, mask, v):
    """Discrete (integral a grad v . grad v) / (integral v^2) for a grid trial
    field supported in the mask."""
    v = np.asarray(v, dtype=float)
    if v.shape != mask.occ.shape:
        raise WindowError(
            f"trial shape {v.shape} does not match window "
            f"{mask.occ.shape}"
        )
    if np.any((v != 0.0) & ~mask.occ):
        raise WindowError("trial field must vanish outside the mask")
    x = v[mask.occ]
    den = float(x @ x)
    if den == 0.0:
        raise EmptyMaskError("trial field is identically zero")
    A, _ = assemble_operator(coeff, mask)
    return float(x @ (A @ x)) / den


# ---------------------------------------------------------------------------
# scale-invariant diagnostics of the ground state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenDiagnostics:
    lip_scaled: float        # |U|^(1/2 + 1/d) max |grad u|
    nondeg_scaled: float     # min over boundary samples/radii of |U|^... sup u / r
    sup_scaled: float        # |U|^(1/2) max u


def _gradient_grid(mask, u):
    """Central differences where both neighbors are occupied, one-sided at the
    boundary (toward the occupied side), per axis."""
    occ = mask.occ
    h = mask.window.h
    ny, nx = occ.shape
    up = np.zeros((ny + 2, nx + 2))
    up[1:-1, 1:-1] = np.where(occ, u, 0.0)
    op = np.zeros((ny + 2, nx + 2), dtype=bool)
    op[1:-1, 1:-1] = occ

    out = []
    for axis_W, axis_E in (((slice(1, -1), slice(0, -2)),
                            (slice(1, -1), slice(2, None))),
                           ((slice(0, -2), slice(1, -1)),
                            (slice(2, None), slice(1, -1)))):
        uW, uE = up[axis_W], up[axis_E]
        oW, oE = op[axis_W], op[axis_E]
        uC = up[1:-1, 1:-1]
        g = np.where(
            oW & oE, (uE - uW) / (2 * h),
            np.where(oE, (uE - uC) / h,
                     np.where(oW, (uC - uW) / h, 0.0)),
        )
        out.append(np.where(occ, g, 0.0))
    return out[0], out[1]


def _dyadic_radii(h, rmax):
    rs = []
    r = 2.0 * h
    while r <= rmax * (1 + 1e-9):
        rs.append(r)
        r *= 2.0
    return rs or [2.0 * h]


def diagnostics(result, max_samples=256):
    """Scale-invariant Lipschitz / non-degeneracy / sup diagnostics."""
    mask = result.mask
    u = result.u
    m = mask.volume
    gx, gy = _gradient_grid(mask, u)
    grad = np.hypot(gx, gy)
    lip_scaled = m * float(grad.max())
    sup_scaled = math.sqrt(m) * float(u.max())

    pts = mask.occupied_points()
    vals = u[mask.occ]
    b_pts = mask.boundary_points()
    if b_pts.shape[0] > max_samples:
        sel = np.linspace(0, b_pts.shape[0] - 1, max_samples).round().astype(int)
        b_pts = b_pts[sel]
    radii = _dyadic_radii(mask.window.h, math.sqrt(m))
    ell = math.inf
    for z in b_pts:
        d2 = np.sum((pts - z) ** 2, axis=1)
        for r in radii:
            sup_r = float(np.max(vals[d2 <= r * r + 1e-12]))
            ell = min(ell, m * sup_r / r)
    return EigenDiagnostics(
        lip_scaled=float(lip_scaled),
        nondeg_scaled=float(ell),
        sup_scaled=float(sup_scaled),
    )


# ---------------------------------------------------------------------------
# ground-state stability certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapCheck:
    delta: float             # Rayleigh excess of the trial over lambda_1
    dist: float              # min over signs of ||v - s u||_{L2}
    gap_ratio: float         # lambda_2 / lambda_1 - 1
    lhs: float               # gap_ratio * dist^2
    rhs: float               # 4 delta
    holds: bool
    degenerate: bool


def gap_stability_check(coeff, mask, v, result=None, tol=1e-10):
    """Certifies (lambda_2/lambda_1 - 1) min_s ||v - s u||^2 <= 4 delta for a
    normalized trial v with Rayleigh quotient <= (1 + delta) lambda_1."""
    if result is None or result.lambda2 is None:
        result = eigen(coeff, mask, k=2, tol=tol)
    h = mask.window.h
    v = np.asarray(v, dtype=float)
    nv = h * np.linalg.norm(v)
    if nv == 0:
        raise EmptyMaskError("trial field is identically zero")
    v = v / nv
    delta = rayleigh_quotient(coeff, mask, v) / result.lambda1 - 1.0
    if delta < -1e-9:
        raise InternalInconsistencyError(
            f"trial beats the computed ground state by {-delta:.3e}"
        )
    delta = max(delta, 0.0)
    u = result.u
    dist = min(h * np.linalg.norm(v - u), h * np.linalg.norm(v + u))
    gap_ratio = result.lambda2 / result.lambda1 - 1.0
    degenerate = gap_ratio < 1e-8
    if degenerate:
        warnings.warn(
            "spectral gap below resolution; stability bound is vacuous",
            DegenerateGapWarning,
        )
    lhs = gap_ratio * dist * dist
    rhs = 4.0 * delta
    return GapCheck(
        delta=float(delta), dist=float(dist), gap_ratio=float(gap_ratio),
        lhs=float(lhs), rhs=float(rhs),
        holds=bool(lhs <= rhs * (1 + 1e-8) + 1e-12), degenerate=degenerate,
    )
