"""Grid windows, occupancy masks, ellipsoids, and set-geometry diagnostics.

All geometry lives on uniform cell-centered grids: a window has nx x ny cells
of spacing h with origin (ox, oy), and cell (ix, iy) has center
(ox + (ix+0.5) h, oy + (iy+0.5) h).  Arrays are indexed [iy, ix].  A cell is
"boundary" when it is occupied and has an unoccupied 4-neighbor; cells
outside the window count as unoccupied.

Distance conventions (see module docstrings of the users):

* ``distance_to_boundary_cells`` / ``signed_distance`` measure Euclidean
  distance to the boundary-cell *centers* (exact via the two-pass EDT), so
  boundary cells are at distance zero.  The penalization machinery depends on
  that exactness.
* ``inside_depth`` measures, inside the mask, distance to the nearest
  unoccupied cell center; strips {d(x, boundary) <= t} are measured with it
  so the strip area is ~ perimeter * t without a one-cell offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    ConfigError,
    EllipticityError,
    EmptyMaskError,
    WindowError,
)

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


# ---------------------------------------------------------------------------
# 2x2 SPD helpers (closed forms; no iterative linear algebra needed)
# ---------------------------------------------------------------------------

def check_spd_2x2(M, what="tensor"):
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2):
        raise EllipticityError(f"{what} must be 2x2, got shape {M.shape}")
    if abs(M[0, 1] - M[1, 0]) > 1e-10 * (1.0 + abs(M[0, 1])):
        raise EllipticityError(f"{what} not symmetric: {M.tolist()}")
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if det <= 0 or M[0, 0] <= 0:
        raise EllipticityError(f"{what} not positive definite: {M.tolist()}")
    return M, float(det)


def sym_sqrt_2x2(M):
    """Symmetric square root of an SPD 2x2 matrix, closed form."""
    M, det = check_spd_2x2(M)
    s = math.sqrt(det)
    t = math.sqrt(M[0, 0] + M[1, 1] + 2.0 * s)
    return (M + s * np.eye(2)) / t


def inv_2x2(M):
    M = np.asarray(M, dtype=float)
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det


# ---------------------------------------------------------------------------
# windows and masks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridWindow:
    nx: int
    ny: int
    h: float
    ox: float = 0.0
    oy: float = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or not (self.h > 0):
            raise WindowError(f"degenerate window {self}")

    @classmethod
    def covering(cls, xmin, xmax, ymin, ymax, h):
        """Smallest window covering the box, origin snapped to the h-lattice."""
        ox = math.floor(xmin / h) * h
        oy = math.floor(ymin / h) * h
        nx = max(1, int(math.ceil((xmax - ox) / h - 1e-12)))
        ny = max(1, int(math.ceil((ymax - oy) / h - 1e-12)))
        return cls(nx=nx, ny=ny, h=h, ox=ox, oy=oy)

    def x_centers(self):
        return self.ox + self.h * (np.arange(self.nx) + 0.5)

    def y_centers(self):
        return self.oy + self.h * (np.arange(self.ny) + 0.5)

    def center_mesh(self):
        """(X, Y) arrays of cell centers, each (ny, nx)."""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="xy")

    @property
    def xmax(self):
        return self.ox + self.nx * self.h

    @property
    def ymax(self):
        return self.oy + self.ny * self.h

    def aligned_with(self, other, tol=1e-9):
        """True if cell centers of both windows lie on one common h-lattice."""
        if abs(self.h - other.h) > tol * self.h:
            return False
        for d in ((self.ox - other.ox) / self.h, (self.oy - other.oy) / self.h):
            if abs(d - round(d)) > 1e-6:
                return False
        return True


@dataclass(frozen=True)
class DomainMask:
    """Occupancy mask on a grid window; occ is bool, shape (ny, nx)."""

    window: GridWindow
    occ: np.ndarray

    def __post_init__(self):
        occ = np.asarray(self.occ, dtype=bool)
        if occ.shape != (self.window.ny, self.window.nx):
            raise WindowError(
                f"occupancy shape {occ.shape} does not match window "
                f"({self.window.ny}, {self.window.nx})"
            )
        occ = occ.copy()
        occ.setflags(write=False)
        object.__setattr__(self, "occ", occ)

    # -- measure ------------------------------------------------------------

    @property
    def count(self):
        return int(np.count_nonzero(self.occ))

    @property
    def volume(self):
        return self.count * self.window.h**2

    @property
    def is_empty(self):
        return self.count == 0

    def require_nonempty(self, what="mask"):
        if self.is_empty:
            raise EmptyMaskError(f"{what} has no occupied cells")
        return self

    # -- geometry -----------------------------------------------------------

    def boundary_occ(self):
        """Occupied cells with an unoccupied 4-neighbor (window edge counts)."""
        interior = ndimage.binary_erosion(self.occ, structure=_CROSS,
                                          border_value=0)
        return self.occ & ~interior

    def boundary_points(self):
        """(N, 2) array of boundary cell centers."""
        iy, ix = np.nonzero(self.boundary_occ())
        w = self.window
        return np.column_stack([w.ox + (ix + 0.5) * w.h,
                                w.oy + (iy + 0.5) * w.h])

    def occupied_points(self):
        iy, ix = np.nonzero(self.occ)
        w = self.window
        return np.column_stack([w.ox + (ix + 0.5) * w.h,
                                w.oy + (iy + 0.5) * w.h])

    def barycenter(self):
        self.require_nonempty()
        return self.occupied_points().mean(axis=0)

    def perimeter_estimate(self):
        """Boundary-cell count times h; crude but consistent across masks."""
        return float(np.count_nonzero(self.boundary_occ())) * self.window.h

    def dilated(self, iterations=1):
        return DomainMask(self.window, ndimage.binary_dilation(
            self.occ, structure=_CROSS, iterations=iterations))

    def eroded(self, iterations=1):
        return DomainMask(self.window, ndimage.binary_erosion(
            self.occ, structure=_CROSS, iterations=iterations,
            border_value=0))

    def translated_cells(self, dix, diy):
        """Shift occupancy by whole cells; cells shifted out are dropped."""
        out = np.zeros_like(self.occ)
        src = self.occ
        ny, nx = src.shape
        ys = slice(max(0, diy), min(ny, ny + diy))
        xs = slice(max(0, dix), min(nx, nx + dix))
        ys_src = slice(max(0, -diy), min(ny, ny - diy))
        xs_src = slice(max(0, -dix), min(nx, nx - dix))
        out[ys, xs] = src[ys_src, xs_src]
        return DomainMask(self.window, out)

    # -- file format ---------------------------------------------------------

    def to_text(self):
        w = self.window
        head = f"FKMASK 1 {w.nx} {w.ny} {w.h!r} {w.ox!r} {w.oy!r}"
        rows = ["".join("1" if v else "0" for v in self.occ[iy])
                for iy in range(w.ny)]
        return "\n".join([head] + rows) + "\n"

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_text())

    @classmethod
    def from_text(cls, text):
        lines = text.strip("\n").split("\n")
        parts = lines[0].split()
        if len(parts) != 7 or parts[0] != "FKMASK" or parts[1] != "1":
            raise ConfigError(f"not an FKMASK v1 header: {lines[0]!r}")
        nx, ny = int(parts[2]), int(parts[3])
        h, ox, oy = float(parts[4]), float(parts[5]), float(parts[6])
        if len(lines) != 1 + ny:
            raise ConfigError(f"expected {ny} mask rows, got {len(lines) - 1}")
        occ = np.zeros((ny, nx), dtype=bool)
        for iy, row in enumerate(lines[1:]):
            if len(row) != nx or set(row) - {"0", "1"}:
                raise ConfigError(f"bad mask row {iy}: {row!r}")
            occ[iy] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("1")
        return cls(GridWindow(nx=nx, ny=ny, h=h, ox=ox, oy=oy), occ)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_text(f.read())


def embed(mask, window):
    """Re-home a mask into a larger aligned window (occupancy preserved)."""
    if not mask.window.aligned_with(window):
        raise WindowError("windows are not on a common lattice")
    h = window.h
    dix = round((mask.window.ox - window.ox) / h)
    diy = round((mask.window.oy - window.oy) / h)
    if dix < 0 or diy < 0 or dix + mask.window.nx > window.nx \
            or diy + mask.window.ny > window.ny:
        raise WindowError("mask does not fit inside the target window")
    occ = np.zeros((window.ny, window.nx), dtype=bool)
    occ[diy:diy + mask.window.ny, dix:dix + mask.window.nx] = mask.occ
    return DomainMask(window, occ)


def common_window(a, b):
    """Smallest aligned window containing both masks; embeds both."""
    if not a.window.aligned_with(b.window):
        raise WindowError("masks live on incompatible grids")
    h = a.window.h
    ox = min(a.window.ox, b.window.ox)
    oy = min(a.window.oy, b.window.oy)
    nx = int(round((max(a.window.xmax, b.window.xmax) - ox) / h))
    ny = int(round((max(a.window.ymax, b.window.ymax) - oy) / h))
    w = GridWindow(nx=nx, ny=ny, h=h, ox=ox, oy=oy)
    return embed(a, w), embed(b, w)


def rescaled(mask, t, window=None, center=None):
    """Dilate the mask by factor t about a center (nearest-cell resampling)."""
    if t <= 0:
        raise ConfigError(f"dilation factor must be positive, got {t}")
    mask.require_nonempty("mask to rescale")
    c = mask.barycenter() if center is None else np.asarray(center, float)
    w = window if window is not None else mask.window
    X, Y = w.center_mesh()
    # pull back: x in tU  <=>  c + (x - c)/t in U
    xs = c[0] + (X - c[0]) / t
    ys = c[1] + (Y - c[1]) / t
    ix = np.floor((xs - mask.window.ox) / mask.window.h).astype(int)
    iy = np.floor((ys - mask.window.oy) / mask.window.h).astype(int)
    ok = (ix >= 0) & (ix < mask.window.nx) & (iy >= 0) & (iy < mask.window.ny)
    occ = np.zeros(X.shape, dtype=bool)
    occ[ok] = mask.occ[iy[ok], ix[ok]]
    return DomainMask(w, occ)


# ---------------------------------------------------------------------------
# ellipsoids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ellipsoid:
    """E = center + sqrt_abar . B_rho; volume = det(abar)^(1/2) pi rho^2."""

    center: np.ndarray
    rho: float
    sqrt_abar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=float).reshape(2))
        S, _ = check_spd_2x2(self.sqrt_abar, "sqrt_abar")
        object.__setattr__(self, "sqrt_abar", S)
        if not (self.rho > 0):
            raise ConfigError(f"ellipsoid radius must be positive, got {self.rho}")

    @classmethod
    def from_tensor(cls, abar, rho, center=(0.0, 0.0)):
        return cls(center=np.asarray(center, float), rho=float(rho),
                   sqrt_abar=sym_sqrt_2x2(abar))

    @classmethod
    def of_volume(cls, abar, volume, center=(0.0, 0.0)):
        S = sym_sqrt_2x2(abar)
        det_sqrt = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
        rho = math.sqrt(volume / (math.pi * det_sqrt))
        return cls(center=np.asarray(center, float), rho=rho, sqrt_abar=S)

    @property
    def det_sqrt_abar(self):
        S = self.sqrt_abar
        return float(S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0])

    @property
    def volume(self):
        # det(abar)^{1/2} = det(sqrt_abar)
        return self.det_sqrt_abar * math.pi * self.rho**2

    @property
    def abar(self):
        return self.sqrt_abar @ self.sqrt_abar

    def semi_extent(self):
        """Half-width of the bounding box along each axis."""
        A = self.abar
        return self.rho * np.sqrt(np.array([A[0, 0], A[1, 1]]))

    def membership(self, x, y):
        """Boolean: |sqrt_abar^{-1} (p - center)| < rho."""
        Si = inv_2x2(self.sqrt_abar)
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        u = Si[0, 0] * dx + Si[0, 1] * dy
        v = Si[1, 0] * dx + Si[1, 1] * dy
        return u * u + v * v < self.rho**2

    def radial(self, x, y):
        """|sqrt_abar^{-1}(p - center)| / rho (1 on the boundary)."""
        Si = inv_2x2(self.sqrt_abar)
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        u = Si[0, 0] * dx + Si[0, 1] * dy
        v = Si[1, 0] * dx + Si[1, 1] * dy
        return np.sqrt(u * u + v * v) / self.rho


def rasterize_ellipsoid(ellipsoid, window):
    """Occupancy by cell-center membership; bbox must fit the window."""
    ext = ellipsoid.semi_extent()
    c = ellipsoid.center
    if (c[0] - ext[0] < window.ox - 1e-12 or c[0] + ext[0] > window.xmax + 1e-12
            or c[1] - ext[1] < window.oy - 1e-12
            or c[1] + ext[1] > window.ymax + 1e-12):
        raise WindowError(
            f"ellipsoid bbox ±{ext} about {c} exceeds window "
            f"[{window.ox},{window.xmax}]x[{window.oy},{window.ymax}]"
        )
    X, Y = window.center_mesh()
    return DomainMask(window, ellipsoid.membership(X, Y))


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def distance_to_boundary_cells(mask):
    """Distance (in physical units) from every cell center to the nearest
    boundary cell center; exact Euclidean, zero on boundary cells."""
    mask.require_nonempty()
    b = mask.boundary_occ()
    return ndimage.distance_transform_edt(~b) * mask.window.h


def signed_distance(mask):
    """Distance to the boundary-cell set, negated inside the mask."""
    d = distance_to_boundary_cells(mask)
    return np.where(mask.occ, -d, d)


def inside_depth(mask):
    """Inside the mask: distance to the nearest unoccupied cell center."""
    return ndimage.distance_transform_edt(mask.occ) * mask.window.h


def hausdorff_boundary(a, b):
    """Hausdorff distance between boundary cell-center sets (exact on the
    grid; as an estimate of d_H(boundary curves) it is accurate to h*sqrt(2))."""
    a.require_nonempty("first mask")
    b.require_nonempty("second mask")
    A, B = common_window(a, b)
    h = A.window.h
    bA, bB = A.boundary_occ(), B.boundary_occ()
    dB = ndimage.distance_transform_edt(~bB) * h
    dA = ndimage.distance_transform_edt(~bA) * h
    return float(max(dB[bA].max(), dA[bB].max()))


def symmetric_difference_volume(a, b):
    A, B = common_window(a, b)
    return float(np.count_nonzero(A.occ ^ B.occ)) * A.window.h**2


# ---------------------------------------------------------------------------
# asymmetry (best-fitting ellipsoid of equal volume)
# ---------------------------------------------------------------------------

def _sym_diff_vs_ellipsoid(mask, ell, pts):
    """|mask Δ E| via center-membership counts on the mask's (extended) lattice."""
    h = mask.window.h
    inside_U = ell.membership(pts[:, 0], pts[:, 1])
    n_U_and_E = int(np.count_nonzero(inside_U))
    # raster count of E on the same lattice, independent of window bounds
    ext = ell.semi_extent()
    w = mask.window
    ix0 = math.floor((ell.center[0] - ext[0] - w.ox) / h) - 1
    ix1 = math.ceil((ell.center[0] + ext[0] - w.ox) / h) + 1
    iy0 = math.floor((ell.center[1] - ext[1] - w.oy) / h) - 1
    iy1 = math.ceil((ell.center[1] + ext[1] - w.oy) / h) + 1
    xs = w.ox + (np.arange(ix0, ix1) + 0.5) * h
    ys = w.oy + (np.arange(iy0, iy1) + 0.5) * h
    n_E = int(np.count_nonzero(ell.membership(xs[None, :], ys[:, None])))
    n_U = pts.shape[0]
    return (n_U + n_E - 2 * n_U_and_E) * h * h


def asymmetry(mask, abar, return_ellipsoid=False):
    """Scale-invariant distance to the nearest equal-volume abar-ellipsoid.

    Minimizes |U Δ E(c)| / |U| over the center c by coordinate pattern search
    started at the barycenter, with step halving down to h/2.  The ellipsoid
    radius is fixed by |E| = |U| exactly.
    """
    mask.require_nonempty()
    m = mask.volume
    ell0 = Ellipsoid.of_volume(abar, m)
    pts = mask.occupied_points()
    h = mask.window.h

    def value(c):
        e = Ellipsoid(center=c, rho=ell0.rho, sqrt_abar=ell0.sqrt_abar)
        return _sym_diff_vs_ellipsoid(mask, e, pts) / m

    c = mask.barycenter()
    best = value(c)
    step = max(0.25 * ell0.rho, h)
    dirs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    while step >= 0.5 * h:
        moved = False
        for d in dirs:
            cand = c + step * d
            v = value(cand)
            if v < best - 1e-15:
                c, best, moved = cand, v, True
        if not moved:
            step *= 0.5
    if return_ellipsoid:
        return best, Ellipsoid(center=c, rho=ell0.rho, sqrt_abar=ell0.sqrt_abar)
    return best


# ---------------------------------------------------------------------------
# density / regularity diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegularityReport:
    kappa0: float
    kappaU: float
    strip_P: float
    n_boundary_samples: int


def _subsample(points, cap):
    n = points.shape[0]
    if n <= cap:
        return points
    idx = np.linspace(0, n - 1, cap).round().astype(int)
    return points[idx]


def _lattice_ball_count(r_over_h):
    """Number of lattice offsets with |k| <= r/h (Gauss circle count)."""
    R = int(math.floor(r_over_h))
    ks = np.arange(-R, R + 1)
    width = np.floor(np.sqrt(np.maximum(r_over_h**2 - ks.astype(float) ** 2, 0.0)))
    return int(np.sum(2 * width + 1))


def _dyadic_radii(h, rmax, start=2.0):
    rs = []
    r = start * h
    while r <= rmax * (1 + 1e-9):
        rs.append(r)
        r *= 2.0
    return rs or [start * h]


def density_report(mask, max_samples=256):
    """Interior/exterior density kappa0, doubling constant kappaU, and the
    boundary-strip constant strip_P, all from pixel counts.

    kappa0 = min over sampled boundary centers and dyadic radii
    r in {2h, 4h, ...} up to |U|^(1/2) of min(inner, 1 - inner) where
    inner = |U ∩ B_r| / |B_r| (balls may stick out of the window; outside
    counts as unoccupied).  kappaU doubles radii about interior samples and
    inverts the exterior density about boundary samples.  strip_P is the max
    over a dyadic t-grid of |{x in U : d(x, boundary) <= t}| / (|U|^(1/2) t).
    """
    mask.require_nonempty()
    h = mask.window.h
    m = mask.volume
    rmax = math.sqrt(m)
    occ_pts = mask.occupied_points()
    b_pts = _subsample(mask.boundary_points(), max_samples)
    i_pts = _subsample(occ_pts, max_samples)
    radii = _dyadic_radii(h, max(rmax, 4 * h))
    ball = {r: _lattice_ball_count(r / h) for r in radii}

    kappa0 = 1.0
    term2 = 0.0
    for z in b_pts:
        d2 = np.sum((occ_pts - z) ** 2, axis=1)
        for r in radii:
            occ_in = int(np.count_nonzero(d2 <= r * r + 1e-9))
            nball = ball[r]
            inner = occ_in / nball
            kappa0 = min(kappa0, inner, 1.0 - inner)
            if nball > occ_in:
                term2 = max(term2, nball / (nball - occ_in))

    term1 = 0.0
    for z in i_pts:
        d2 = np.sum((occ_pts - z) ** 2, axis=1)
        for r in radii:
            big = int(np.count_nonzero(d2 <= r * r + 1e-9))
            small = int(np.count_nonzero(d2 <= 0.25 * r * r + 1e-9))
            if small > 0:
                term1 = max(term1, big / small)

    depth = inside_depth(mask)
    strip_P = 0.0
    for t in _dyadic_radii(h, rmax):
        area = np.count_nonzero(mask.occ & (depth <= t + 0.5 * h + 1e-9)) * h * h
        strip_P = max(strip_P, area / (math.sqrt(m) * t))

    return RegularityReport(
        kappa0=float(kappa0),
        kappaU=float(term1 + term2),
        strip_P=float(strip_P),
        n_boundary_samples=int(b_pts.shape[0]),
    )


def strip_area(mask, t):
    """|{x in U : d(x, boundary) <= t}| with the inside-depth convention."""
    h = mask.window.h
    depth = inside_depth(mask)
    return float(np.count_nonzero(mask.occ & (depth <= t + 0.5 * h + 1e-9)) * h * h)


# ---------------------------------------------------------------------------
# capped-log modulus and the weighted symmetric difference
# ---------------------------------------------------------------------------

def omega_modulus(s, p, gamma=None):
    """omega(s) = |log(2 + 1/s)|^(-p), omega(0) = 0; optionally capped."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(divide="ignore"):
        out[pos] = np.log(2.0 + 1.0 / s[pos]) ** (-float(p))
    if gamma is not None:
        out = np.minimum(out, gamma)
    return out


def _check_omega_params(p, gamma):
    if not p > 6:
        raise ConfigError(f"modulus exponent p must exceed d + 4 = 6, got {p}")
    cap = math.log(2.0) ** (-float(p))
    if not (0 < gamma < cap):
        raise ConfigError(
            f"gamma must lie in (0, |log 2|^-p) = (0, {cap:.6g}), got {gamma}"
        )


def dist_omega(a, b, p, gamma):
    """Weighted symmetric difference sum_{A Δ B} omega_cap(d(x, bnd B)/|B|^(1/2)).

    The modulus is capped at gamma.  Distances are to B's boundary cells plus
    half a cell (the cell-center-to-face offset), so every cell of A Δ B
    carries a strictly positive weight -- without the offset the boundary
    layer itself would be free, and the measure bound against dist_omega
    would fail on masks differing only there.  Any code pairing this with a
    penalty field must use the same offset so the two share one distance
    field exactly.
    """
    _check_omega_params(p, gamma)
    b.require_nonempty("reference mask")
    A, B = common_window(a, b)
    h = A.window.h
    scale = math.sqrt(B.volume)
    d = distance_to_boundary_cells(B) + 0.5 * h
    diff = A.occ ^ B.occ
    w = omega_modulus(d[diff] / scale, p, gamma)
    return float(np.sum(w) * h * h)


# ---------------------------------------------------------------------------
# seeded random blobs (test corpora and candidate sets)
# ---------------------------------------------------------------------------

def random_blob_mask(rng, window, fill=0.2, sigma_cells=None):
    """A connected random blob: smoothed Gaussian noise thresholded at the
    requested fill fraction, largest 4-connected component, holes filled."""
    sigma = sigma_cells if sigma_cells is not None else min(window.nx, window.ny) / 10
    f = ndimage.gaussian_filter(rng.standard_normal((window.ny, window.nx)),
                                sigma=sigma, mode="nearest")
    occ = f > np.quantile(f, 1.0 - fill)
    lab, nlab = ndimage.label(occ, structure=_CROSS)
    if nlab == 0:
        raise EmptyMaskError("random field produced an empty mask")
    sizes = ndimage.sum_labels(np.ones_like(lab), lab, index=np.arange(1, nlab + 1))
    occ = lab == (1 + int(np.argmax(sizes)))
    occ = ndimage.binary_fill_holes(occ)
    return DomainMask(window, occ)


def matched_volume_pair(rng, window, fill=0.2, perturb=0.15, sigma_cells=None):
    """Two blobs with exactly equal cell counts: a smooth field and a
    perturbed copy, each thresholded at the same rank."""
    sigma = sigma_cells if sigma_cells is not None else min(window.nx, window.ny) / 10
    f = ndimage.gaussian_filter(rng.standard_normal((window.ny, window.nx)),
                                sigma=sigma, mode="nearest")
    g = ndimage.gaussian_filter(rng.standard_normal((window.ny, window.nx)),
                                sigma=sigma, mode="nearest")
    f = (f - f.mean()) / f.std()
    g = (g - g.mean()) / g.std()
    k = max(8, int(round(fill * window.nx * window.ny)))

    def top_k(field):
        flat = field.ravel()
        idx = np.argpartition(flat, -k)[-k:]
        occ = np.zeros(flat.shape, dtype=bool)
        occ[idx] = True
        return occ.reshape(field.shape)

    return (DomainMask(window, top_k(f)),
            DomainMask(window, top_k(f + perturb * g)))
