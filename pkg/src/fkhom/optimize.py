"""Penalized shape optimization of the principal Dirichlet eigenvalue.

The discrete objective is J(U) = lambda_1(U, a) + volume term, where the
volume term is either mu |U| (constant penalty) or the integral of a spatial
penalty g over U.  The descent is deliberately simple and fully deterministic:
at each outer iteration the candidates are the superlevel sets {u > t} of the
current ground state at a fixed number of quantile levels, plus a one-cell
dilation and erosion of the current mask; the best candidate is accepted only
on strict improvement, so the energy trace is non-increasing by construction.

The spatial penalty used by the hard-constraint pipeline is the odd-reflected
capped-log modulus about a target mask U*:

    g(x) = mu* (1 + sign(rho(x)) min(gamma0, omega(|rho(x)| / |U*|^(1/2)))),

with rho the signed distance to U*'s boundary cells and
omega(s) = |log(2 + 1/s)|^(-p).  Since omega(0) = 0, g = mu* exactly on the
boundary layer, and the identity

    J_g(V) = J_mu*(V) + mu* dist_omega(V, U*) - mu* integral_{U*} omega

holds cellwise to machine precision for any V in the penalty window.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import eigsolve
from .ball import LAMBDA_BALL, lambda1_ellipsoid
from .cell import HomogenizedTensor, homogenize, solve_correctors
from .errors import (
    ConfigError,
    EmptyMaskError,
    MonotonicityError,
    WindowError,
)
from .fields import OptOptions, SweepOptions
from .masks import (
    DomainMask,
    Ellipsoid,
    GridWindow,
    distance_to_boundary_cells,
    dist_omega,
    embed,
    omega_modulus,
    rasterize_ellipsoid,
    rescaled,
    symmetric_difference_volume,
    density_report,
)


# ---------------------------------------------------------------------------
# the effective-limit ellipsoid
# ---------------------------------------------------------------------------

def ellipsoid_minimizer(abar, mu, center=(0.0, 0.0)):
    """Minimizer of lambda_1(E, abar) + mu |E| over abar-ellipsoids.

    rho* solves mu = lambda_1(B_1) / (sqrt(det abar) pi rho^4); the minimum
    value is 2 lambda_1(B_1) / rho*^2.  Returns (Ellipsoid, J*).
    """
    M = abar.abar if hasattr(abar, "abar") else np.asarray(abar, float)
    det = float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    if det <= 0 or mu <= 0:
        raise ConfigError(f"need SPD abar and mu > 0, got det={det}, mu={mu}")
    rho = (LAMBDA_BALL / (math.sqrt(det) * math.pi * mu)) ** 0.25
    ell = Ellipsoid.from_tensor(M, rho, center)
    return ell, 2.0 * LAMBDA_BALL / rho**2


# ---------------------------------------------------------------------------
# penalty fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PenaltyField:
    """Spatial penalty g on a grid window, built about a reference mask."""

    window: GridWindow
    g: np.ndarray              # (ny, nx)
    mu: float
    gamma0: float
    p: float
    reference: DomainMask      # embedded in `window`
    reference_integral: float  # integral over the reference of the capped omega

    @property
    def far_value(self):
        return self.mu * (1.0 + self.gamma0)

    def volume_term(self, mask):
        if not (mask.window.nx == self.window.nx
                and mask.window.ny == self.window.ny
                and mask.window.aligned_with(self.window)):
            raise WindowError("mask and penalty live on different windows")
        return float(np.sum(self.g[mask.occ]) * self.window.h**2)

    def validate(self, rng_seed=0, n_pairs=512):
        """Hypothesis report: two-sided ellipticity of g/mu (with the
        effective gamma of the odd reflection), scaled Dini continuity on
        random pairs, Dini summability of omega_g^(1/6), and far-field
        saturation.

        The continuity modulus is omega_g(s) = max(s, min(2 gamma0,
        omega(s))) at argument mu^(1/4)|x-y|: the range cap is 2 gamma0
        because the odd reflection spans [1 - gamma0, 1 + gamma0], and the
        linear floor omega_g(s) >= s is required -- the capped log modulus is
        convex near its cap, so it is not its own modulus of continuity
        there, and the floor is what absorbs that cap-slope regime.
        """
        ratio = self.g / self.mu
        lo, hi = float(ratio.min()), float(ratio.max())
        gamma_eff = max(hi - 1.0, 1.0 / lo - 1.0) if lo > 0 else math.inf
        hyp1 = lo > 0 and 1.0 / (1.0 + gamma_eff) <= lo + 1e-12 \
            and hi <= 1.0 + gamma_eff + 1e-12

        # scaled Dini continuity: |g(x)-g(y)| <= mu omega_g(mu^(1/4) |x-y|)
        rng = np.random.default_rng(rng_seed)
        X, Y = self.window.center_mesh()
        idx = rng.integers(0, X.size, size=(n_pairs, 2))
        xs, ys, gs = X.ravel(), Y.ravel(), self.g.ravel()
        d = np.hypot(xs[idx[:, 0]] - xs[idx[:, 1]],
                     ys[idx[:, 0]] - ys[idx[:, 1]])
        dg = np.abs(gs[idx[:, 0]] - gs[idx[:, 1]])
        s = self.mu**0.25 * d
        bound = self.mu * np.maximum(
            s, omega_modulus(s, self.p, 2.0 * self.gamma0)
        )
        hyp2 = bool(np.all(dg <= bound + 1e-12 * self.mu))

        # Dini: sum_k omega_g(theta^k)^(1/(d+4)) converges (log part needs
        # p > d + 4; the linear floor contributes a geometric series)
        theta = 0.5
        ks = np.arange(1, 200)
        omega_g = np.maximum(theta**ks,
                             omega_modulus(theta**ks, self.p,
                                           2.0 * self.gamma0))
        terms = omega_g ** (1.0 / 6.0)
        dini_tail = float(terms[100:].sum())
        dini = dini_tail < terms[:100].sum() * 0.5

        # far field: the cap must be active on the window frame
        frame = np.zeros_like(self.g, dtype=bool)
        frame[0, :] = frame[-1, :] = True
        frame[:, 0] = frame[:, -1] = True
        hyp3 = bool(np.allclose(self.g[frame], self.far_value, rtol=1e-12))

        return {
            "hyp1_two_sided": hyp1,
            "gamma_eff": gamma_eff,
            "hyp2_modulus": hyp2,
            "dini_summable": bool(dini),
            "hyp3_far_field": hyp3,
        }


def build_penalty(target, mu, p=7.0, gamma0=0.1, extra_margin=0.0):
    """Odd-reflected capped-log penalty about a target mask.

    The window extends the target's by the saturation distance (where the cap
    gamma0 becomes active) plus a safety layer, so g equals its far value
    mu (1 + gamma0) on the window frame.
    """
    if not p > 6:
        raise ConfigError(f"penalty exponent p must exceed 6, got {p}")
    cap = math.log(2.0) ** (-float(p))
    if not (0 < gamma0 < cap):
        raise ConfigError(
            f"gamma0 must lie in (0, |log 2|^-p) = (0, {cap:.6g}), got {gamma0}"
        )
    if mu <= 0:
        raise ConfigError(f"mu must be positive, got {mu}")
    target.require_nonempty("penalty target")

    m = target.volume
    h = target.window.h
    # omega(s) = gamma0 at s_cap; beyond s_cap * sqrt(m) the penalty saturates
    s_cap = 1.0 / (math.exp(gamma0 ** (-1.0 / p)) - 2.0)
    pad = s_cap * math.sqrt(m) + 2.0 * h + extra_margin
    w0 = target.window
    window = GridWindow.covering(w0.ox - pad, w0.xmax + pad,
                                 w0.oy - pad, w0.ymax + pad, h)
    ref = embed(target, window)
    # half-cell offset: cell centers sit h/2 from the faces, and dist_omega
    # uses the same field, which is what makes the J_g identity exact
    d = distance_to_boundary_cells(ref) + 0.5 * h
    w = omega_modulus(d / math.sqrt(m), p, gamma0)
    sign = np.where(ref.occ, -1.0, 1.0)
    g = mu * (1.0 + sign * w)
    ref_integral = float(np.sum(w[ref.occ]) * h * h)
    return PenaltyField(window=window, g=g, mu=float(mu), gamma0=float(gamma0),
                        p=float(p), reference=ref,
                        reference_integral=ref_integral)


def penalty_to_json(pen):
    return json.dumps({
        "mu": pen.mu, "gamma0": pen.gamma0, "p": pen.p,
        "window": {"nx": pen.window.nx, "ny": pen.window.ny,
                   "h": pen.window.h, "ox": pen.window.ox,
                   "oy": pen.window.oy},
        "g": pen.g.tolist(),
        "reference_rows": ["".join("1" if v else "0" for v in row)
                           for row in pen.reference.occ],
        "reference_integral": pen.reference_integral,
    })


def penalty_from_json(text):
    raw = json.loads(text)
    w = GridWindow(nx=int(raw["window"]["nx"]), ny=int(raw["window"]["ny"]),
                   h=float(raw["window"]["h"]), ox=float(raw["window"]["ox"]),
                   oy=float(raw["window"]["oy"]))
    g = np.array(raw["g"], dtype=float)
    occ = np.array([[c == "1" for c in row] for row in raw["reference_rows"]])
    return PenaltyField(window=w, g=g, mu=float(raw["mu"]),
                        gamma0=float(raw["gamma0"]), p=float(raw["p"]),
                        reference=DomainMask(w, occ),
                        reference_integral=float(raw["reference_integral"]))


# ---------------------------------------------------------------------------
# the discrete objective
# ---------------------------------------------------------------------------

def volume_term(mask, penalty):
    if isinstance(penalty, PenaltyField):
        return penalty.volume_term(mask)
    return float(penalty) * mask.volume


def discrete_J(coeff, mask, penalty, tol=1e-10, v0=None):
    """(J, lambda_1, EigenResult) for a mask under a constant or spatial penalty."""
    res = eigsolve.eigen(coeff, mask, k=1, tol=tol, v0=v0)
    return res.lambda1 + volume_term(mask, penalty), res.lambda1, res


# ---------------------------------------------------------------------------
# descent by thresholding the ground state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRow:
    iter: int
    energy: float
    lambda1: float
    volume: float
    accepted_move: str


@dataclass(frozen=True)
class OptResult:
    mask: DomainMask
    energy: float
    lambda1: float
    volume: float
    trace: tuple
    converged: bool
    iterations: int
    n_solves: int


def minimize_J(coeff, penalty, init, opts=None, tol=1e-10):
    """Monotone descent over superlevel-set and one-cell morphology moves.

    Stops after ``stall_iters`` consecutive iterations without a strict
    improvement, or at ``max_outer``.  The returned trace is non-increasing
    in energy; row 0 records the initial state.
    """
    opts = opts or OptOptions()
    if isinstance(penalty, (int, float)) and penalty <= 0:
        raise ConfigError(f"penalty mu must be positive, got {penalty}")
    init.require_nonempty("initial mask")
    if init.count < opts.min_cells:
        raise EmptyMaskError(
            f"initial mask has {init.count} cells < min_cells={opts.min_cells}"
        )
    if isinstance(penalty, PenaltyField):
        # everything must live on the penalty's window
        if not (init.window.nx == penalty.window.nx
                and init.window.ny == penalty.window.ny
                and init.window.aligned_with(penalty.window)):
            raise WindowError("initial mask must live on the penalty window")

    n_solves = 0
    cache = {}

    def evaluate(mask, v0=None):
        nonlocal n_solves
        key = mask.occ.tobytes()
        hit = cache.get(key)
        if hit is not None:
            return hit
        J, lam, res = discrete_J(coeff, mask, penalty, tol=tol, v0=v0)
        n_solves += 1
        cache[key] = (J, lam, res)
        return J, lam, res

    current = init
    J_cur, lam_cur, res_cur = evaluate(current)
    trace = [TraceRow(0, J_cur, lam_cur, current.volume, "init")]

    stall = 0
    it = 0
    while it < opts.max_outer and stall < opts.stall_iters:
        it += 1
        u = res_cur.u
        uvals = u[current.occ]
        qs = np.quantile(uvals, np.arange(1, opts.thresholds + 1)
                         / (opts.thresholds + 1))
        candidates = []
        for j, t in enumerate(qs):
            candidates.append((f"threshold:{j}", DomainMask(current.window,
                                                            u > t)))
        candidates.append(("dilate", current.dilated()))
        candidates.append(("erode", current.eroded()))

        seen = {current.occ.tobytes()}
        best = None
        for label, cand in candidates:
            key = cand.occ.tobytes()
            if key in seen or cand.count < opts.min_cells:
                continue
            seen.add(key)
            v0 = res_cur.u[cand.occ]
            if not np.any(v0):
                v0 = None
            J_c, lam_c, res_c = evaluate(cand, v0=v0)
            if best is None or J_c < best[1]:
                best = (label, J_c, lam_c, res_c, cand)

        if best is not None and best[1] < J_cur - 1e-9 * (1.0 + abs(J_cur)):
            label, J_cur, lam_cur, res_cur, current = best
            stall = 0
            trace.append(TraceRow(it, J_cur, lam_cur, current.volume, label))
        else:
            stall += 1
            trace.append(TraceRow(it, J_cur, lam_cur, current.volume, "none"))

    energies = [r.energy for r in trace]
    if any(e2 > e1 + 1e-12 * (1 + abs(e1))
           for e1, e2 in zip(energies, energies[1:])):
        raise MonotonicityError("energy trace increased during descent")

    return OptResult(
        mask=current, energy=float(J_cur), lambda1=float(lam_cur),
        volume=float(current.volume), trace=tuple(trace),
        converged=bool(stall >= opts.stall_iters), iterations=it,
        n_solves=n_solves,
    )


def write_trace_csv(opt_result, path):
    with open(path, "w") as f:
        f.write("iter,energy,lambda1,volume,accepted_move\n")
        for r in opt_result.trace:
            f.write(f"{r.iter},{r.energy!r},{r.lambda1!r},{r.volume!r},"
                    f"{r.accepted_move}\n")


# ---------------------------------------------------------------------------
# volume map and the Lagrange-multiplier selection
# ---------------------------------------------------------------------------

def default_window(mu, abar, h, margin_periods=2.0):
    """Square window about the origin sized for the expected minimizer."""
    ell, _ = ellipsoid_minimizer(abar, mu)
    half = max(2.0 * mu ** (-0.25),
               float(ell.semi_extent().max()) + margin_periods)
    return GridWindow.covering(-half, half, -half, half, h)


@dataclass(frozen=True)
class VolumeMapRow:
    mu: float
    volume: float
    energy: float
    lambda1: float
    mask: DomainMask
    iterations: int


@dataclass(frozen=True)
class VolumeMapScan:
    rows: tuple              # ascending in mu
    jumps: tuple             # (mu_lo, mu_hi) pairs with an excess volume drop
    context: dict

    def volumes(self):
        return np.array([r.volume for r in self.rows])

    def mus(self):
        return np.array([r.mu for r in self.rows])


def _run_single_mu(coeff, mu, h, abar, opt_opts, sweep_opts, tol,
                   warm_mask=None, warm_mu=None):
    window = default_window(mu, abar, h, sweep_opts.margin_periods)
    init = None
    if warm_mask is not None and warm_mu is not None:
        factor = (warm_mu / mu) ** 0.25
        try:
            init = rescaled(warm_mask, factor, window=window,
                            center=warm_mask.barycenter())
            if init.count < opt_opts.min_cells:
                init = None
        except (WindowError, EmptyMaskError):
            init = None
    if init is None:
        ell, _ = ellipsoid_minimizer(abar, mu)
        init = rasterize_ellipsoid(ell, window)
    opt = minimize_J(coeff, mu, init, opts=opt_opts, tol=tol)
    return VolumeMapRow(mu=float(mu), volume=opt.volume, energy=opt.energy,
                        lambda1=opt.lambda1, mask=opt.mask,
                        iterations=opt.iterations)


def volume_map(coeff, mu_grid, h, opt_opts=None, sweep_opts=None,
               abar=None, tol=1e-10, strict=True):
    """Map each mu to the volume of the found J_mu minimizer.

    Runs in descending mu with warm starts (the previous minimizer rescaled
    by (mu_prev/mu)^(1/4)).  Monotonicity (volumes non-increasing in mu) is
    asserted within a tolerance of 2 h * perimeter; a violation raises
    MonotonicityError when strict, and excess drops beyond the mu^(-1/2)
    scaling expectation are recorded as jumps.
    """
    opt_opts = opt_opts or OptOptions()
    sweep_opts = sweep_opts or SweepOptions()
    mus = np.sort(np.asarray(list(mu_grid), dtype=float))
    if mus.size < 2:
        raise ConfigError("volume_map needs at least two mu values")
    if mus[0] <= 0:
        raise ConfigError("mu grid must be positive")
    if abar is None:
        n = max(4, int(round(1.0 / h)))
        abar = homogenize(coeff, None if coeff.is_constant
                          else solve_correctors(coeff, n=n))

    rows = {}
    warm_mask = warm_mu = None
    for mu in mus[::-1]:
        row = _run_single_mu(coeff, mu, h, abar, opt_opts, sweep_opts, tol,
                             warm_mask=warm_mask if sweep_opts.warm_start else None,
                             warm_mu=warm_mu)
        rows[mu] = row
        warm_mask, warm_mu = row.mask, mu

    ordered = tuple(rows[mu] for mu in mus)
    jumps = []
    for r1, r2 in zip(ordered, ordered[1:]):
        # ascending mu: volumes should not increase
        tol_vol = 2.0 * h * r1.mask.perimeter_estimate()
        if r2.volume > r1.volume + tol_vol:
            msg = (f"volume map not monotone: vol({r2.mu:.6g}) = {r2.volume:.6g}"
                   f" > vol({r1.mu:.6g}) = {r1.volume:.6g} + {tol_vol:.3g}")
            if strict:
                raise MonotonicityError(msg)
        expected = r1.volume * (r2.mu / r1.mu) ** (-0.5)
        if expected - r2.volume > sweep_opts.jump_frac * r1.volume:
            jumps.append((float(r1.mu), float(r2.mu)))

    context = {"coeff": coeff, "h": h, "abar": abar, "opt_opts": opt_opts,
               "sweep_opts": sweep_opts, "tol": tol}
    return VolumeMapScan(rows=ordered, jumps=tuple(jumps), context=context)


@dataclass(frozen=True)
class SelectedMu:
    mu: float
    bracket: tuple
    flagged_singular: bool
    rows_used: tuple


def select_mu(scan, m, rtol=0.05, max_refine=10):
    """Bisect the volume map until the target measure m is bracketed by a
    narrow mu interval; flags the selection as singular when m falls inside
    a persistent volume jump."""
    rows = list(scan.rows)
    vols = [r.volume for r in rows]
    if m > max(vols) or m < min(vols):
        raise ConfigError(
            f"target volume {m} outside the scanned range [{min(vols)}, "
            f"{max(vols)}]"
        )
    ctx = scan.context
    # ascending mu -> descending volume
    i = 0
    while i + 1 < len(rows) and not (vols[i] >= m >= vols[i + 1]):
        i += 1
    lo_mu, hi_mu = rows[i].mu, rows[i + 1].mu
    lo_vol, hi_vol = vols[i], vols[i + 1]
    used = [rows[i], rows[i + 1]]
    refines = 0
    while refines < max_refine and (hi_mu - lo_mu) > rtol * lo_mu:
        mid = math.sqrt(lo_mu * hi_mu)
        row = _run_single_mu(ctx["coeff"], mid, ctx["h"], ctx["abar"],
                             ctx["opt_opts"], ctx["sweep_opts"], ctx["tol"],
                             warm_mask=rows[i].mask, warm_mu=rows[i].mu)
        used.append(row)
        if row.volume >= m:
            lo_mu, lo_vol = mid, row.volume
        else:
            hi_mu, hi_vol = mid, row.volume
        refines += 1
    flagged = (lo_vol - hi_vol) > max(0.25 * m,
                                      4.0 * ctx["h"] * math.sqrt(max(m, 1e-12)))
    return SelectedMu(mu=float(math.sqrt(lo_mu * hi_mu)),
                      bracket=(float(lo_mu), float(hi_mu)),
                      flagged_singular=bool(flagged),
                      rows_used=tuple(used))


# ---------------------------------------------------------------------------
# deficits and the hard-constraint pipeline
# ---------------------------------------------------------------------------

def energy_deficit(coeff, mask, mu, best_known, tol=1e-10):
    """|U|^(2/d) (J_mu(U, a) - best_known); the scale-invariant surrogate for
    the eigenvalue deficit at fixed volume."""
    J, _, _ = discrete_J(coeff, mask, mu, tol=tol)
    return mask.volume * (J - best_known)


@dataclass(frozen=True)
class PipelineReport:
    mu_star: float
    omega: DomainMask
    scan: VolumeMapScan
    selected: SelectedMu
    penalty: PenaltyField
    scaled_eig_gap: float        # m |lambda_1(U) - lambda_1(Omega*)|
    measure_closeness: float     # |U Δ Omega*| / m
    dist_omega_value: float
    sigma: float                 # penalized deficit of U against Omega*
    regularity: object


def hard_constraint_pipeline(coeff, target, p=7.0, gamma0=0.1,
                             opt_opts=None, sweep_opts=None, tol=1e-10,
                             mu_points=5):
    """Replace the hard constraint |U| = m by the penalized functional:
    select mu* from the volume map, build the odd-reflected penalty about the
    target, descend, and report closeness of the result to the target."""
    target.require_nonempty("pipeline target")
    opt_opts = opt_opts or OptOptions()
    sweep_opts = sweep_opts or SweepOptions()
    h = target.window.h
    m = target.volume

    n = max(4, int(round(1.0 / h)))
    abar = homogenize(coeff, None if coeff.is_constant
                      else solve_correctors(coeff, n=n))
    det = abar.det_abar
    rho = math.sqrt(m / (math.pi * math.sqrt(det)))
    mu_guess = LAMBDA_BALL / (math.sqrt(det) * math.pi * rho**4)
    mu_grid = mu_guess * np.geomspace(0.4, 2.5, mu_points)

    scan = volume_map(coeff, mu_grid, h, opt_opts, sweep_opts, abar=abar,
                      tol=tol)
    sel = select_mu(scan, m)
    penalty = build_penalty(target, sel.mu, p=p, gamma0=gamma0)
    init = embed(target, penalty.window)
    opt = minimize_J(coeff, penalty, init, opts=opt_opts, tol=tol)
    omega = opt.mask

    lam_U = eigsolve.eigen(coeff, init, k=1, tol=tol).lambda1
    lam_O = opt.lambda1
    J_mu_omega = lam_O + sel.mu * omega.volume
    sigma = m * ((lam_U + sel.mu * m) - J_mu_omega)

    return PipelineReport(
        mu_star=sel.mu,
        omega=omega,
        scan=scan,
        selected=sel,
        penalty=penalty,
        scaled_eig_gap=float(m * abs(lam_U - lam_O)),
        measure_closeness=float(symmetric_difference_volume(omega, init) / m),
        dist_omega_value=float(dist_omega(omega, init, p, gamma0)),
        sigma=float(sigma),
        regularity=density_report(omega),
    )
