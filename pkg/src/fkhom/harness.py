"""Convergence sweeps and scale-invariant reporting.

The central experiment: for a sequence of doubling target measures m_k, place
the penalized optimizer at the multiplier mu(m_k) predicted by the effective
ellipsoid, descend, and record scale-invariant closeness metrics between the
found minimizer and the effective ellipsoid.  All quantities in the CSV are
dimensionless, so rows at different scales are directly comparable.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import eigsolve
from .ball import LAMBDA_BALL, lambda1_ellipsoid
from .cell import homogenize, solve_correctors
from .errors import ConfigError, InternalInconsistencyError
from .fields import OptOptions, SweepOptions
from .masks import (
    asymmetry,
    density_report,
    hausdorff_boundary,
    rasterize_ellipsoid,
)
from .optimize import (
    default_window,
    ellipsoid_minimizer,
    minimize_J,
    volume_map,
)

CSV_HEADER = ("mu,m,lambda_a,lambda_bar_ellipsoid,scaled_err,asym,"
              "hausdorff_scaled,lip_scaled,nondeg_scaled,kappa0,strip_P,"
              "calE,iters")


@dataclass(frozen=True)
class SweepRow:
    mu: float
    m: float
    lambda_a: float
    lambda_bar_ellipsoid: float
    scaled_err: float
    asym: float
    hausdorff_scaled: float
    lip_scaled: float
    nondeg_scaled: float
    kappa0: float
    strip_P: float
    calE: float
    iters: int

    def to_csv(self):
        vals = [self.mu, self.m, self.lambda_a, self.lambda_bar_ellipsoid,
                self.scaled_err, self.asym, self.hausdorff_scaled,
                self.lip_scaled, self.nondeg_scaled, self.kappa0,
                self.strip_P, self.calE]
        return ",".join(repr(v) for v in vals) + f",{self.iters}"


@dataclass(frozen=True)
class RateFit:
    name: str
    slope: float
    intercept: float
    decreasing: bool
    values: tuple


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    fits: dict
    details: tuple
    abar: object


def _log_fit(name, ms, qs, drop_first=True):
    ms = np.asarray(ms, float)
    qs = np.asarray(qs, float)
    lo = 1 if (drop_first and ms.size > 2) else 0
    x = np.log(ms[lo:])
    q = np.abs(qs[lo:])
    keep = q > 0  # quantities at the raster floor come out exactly zero
    if keep.sum() >= 2:
        slope, intercept = np.polyfit(x[keep], np.log(q[keep]), 1)
    else:
        slope = intercept = math.nan
    decreasing = bool(np.all(np.diff(np.abs(qs)) < 0))
    return RateFit(name=name, slope=float(slope), intercept=float(intercept),
                   decreasing=decreasing, values=tuple(float(q) for q in qs))


def rate_sweep(coeff, h=1.0 / 16.0, opts=None, opt_opts=None, tol=1e-10):
    """Doubling-measure sweep against the effective ellipsoid.

    The reference tensor is homogenized at n = round(1/h) cells per period so
    the comparison measures the eigenvalue-level homogenization error of the
    very operator being optimized, not the corrector discretization error.
    """
    opts = opts or SweepOptions()
    opt_opts = opt_opts or OptOptions()
    n = max(4, int(round(1.0 / h)))
    abar = homogenize(coeff, None if coeff.is_constant
                      else solve_correctors(coeff, n=n))
    A = abar.abar

    rows = []
    details = []
    for k in range(opts.levels):
        m_target = opts.m0 * 2.0**k
        mu = LAMBDA_BALL * math.pi * math.sqrt(abar.det_abar) / m_target**2
        window = default_window(mu, abar, h, opts.margin_periods)
        ell0, _ = ellipsoid_minimizer(abar, mu)
        init = rasterize_ellipsoid(ell0, window)
        opt = minimize_J(coeff, mu, init, opts=opt_opts, tol=tol)
        U = opt.mask
        m_act = U.volume

        lam_a = opt.lambda1
        lam_bar = lambda1_ellipsoid(A, m_act)
        scaled_err = m_act * abs(lam_a - lam_bar)

        asym, ebest = asymmetry(U, A, return_ellipsoid=True)
        eras = rasterize_ellipsoid(ebest, U.window)
        hdist = hausdorff_boundary(U, eras) / math.sqrt(m_act)

        res = eigsolve.eigen(coeff, U, k=1, tol=tol)
        diag = eigsolve.diagnostics(res)
        dens = density_report(U)

        lam_U_bar = eigsolve.eigen(abar, U, k=1, tol=tol).lambda1
        lam_E_a = eigsolve.eigen(coeff, eras, k=1, tol=tol).lambda1
        lam_E_bar = eigsolve.eigen(abar, eras, k=1, tol=tol).lambda1
        calE = (eras.volume * (lam_E_a - lam_E_bar)
                + m_act * (lam_U_bar - lam_a))

        rows.append(SweepRow(
            mu=float(mu), m=float(m_act), lambda_a=float(lam_a),
            lambda_bar_ellipsoid=float(lam_bar),
            scaled_err=float(scaled_err), asym=float(asym),
            hausdorff_scaled=float(hdist),
            lip_scaled=float(diag.lip_scaled),
            nondeg_scaled=float(diag.nondeg_scaled),
            kappa0=float(dens.kappa0), strip_P=float(dens.strip_P),
            calE=float(calE), iters=int(opt.iterations),
        ))
        details.append({
            "mask": U, "ellipsoid": ebest, "ellipsoid_raster": eras,
            "lambda_U_bar": lam_U_bar, "lambda_E_a": lam_E_a,
            "lambda_E_bar": lam_E_bar, "density": dens, "opt": opt,
        })

    ms = [r.m for r in rows]
    fits = {
        "scaled_err": _log_fit("scaled_err", ms, [r.scaled_err for r in rows]),
        "asym": _log_fit("asym", ms, [r.asym for r in rows]),
        "hausdorff_scaled": _log_fit("hausdorff_scaled", ms,
                                     [r.hausdorff_scaled for r in rows]),
        "calE": _log_fit("calE", ms, [r.calE for r in rows]),
    }
    return SweepResult(rows=tuple(rows), fits=fits, details=tuple(details),
                       abar=abar)


def scaling_sweep(coeff, mu_lo, mu_hi, points=8, h=1.0 / 16.0, opt_opts=None,
                  sweep_opts=None, tol=1e-10):
    """Power-law check along the volume map: lambda_1 ~ mu^(1/2) and
    |U| ~ mu^(-1/2) in two dimensions."""
    if not (0 < mu_lo < mu_hi):
        raise ConfigError(f"need 0 < mu_lo < mu_hi, got {mu_lo}, {mu_hi}")
    mus = np.geomspace(mu_lo, mu_hi, points)
    scan = volume_map(coeff, mus, h, opt_opts, sweep_opts, tol=tol)
    lam_fit = _log_fit("lambda1", scan.mus(),
                       [r.lambda1 for r in scan.rows], drop_first=False)
    vol_fit = _log_fit("volume", scan.mus(), scan.volumes(), drop_first=False)
    return scan, {"lambda1": lam_fit, "volume": vol_fit}


@dataclass(frozen=True)
class FKReport:
    gap: float          # m lambda_1(U, abar) / sqrt(det) - pi lambda_1(B_1)
    asym: float
    ratio: float        # gap / asym^2
    m: float
    lambda_bar: float
    positive: bool


def faber_krahn_check(abar, mask, tol=1e-10):
    """Quantitative lower bound for the effective-tensor eigenvalue: the
    scale- and tensor-normalized gap over the ball value, against the squared
    asymmetry.  The gap must be positive for any non-ellipsoidal mask."""
    M = abar.abar if hasattr(abar, "abar") else np.asarray(abar, float)
    det = float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    lam = eigsolve.eigen(M, mask, k=1, tol=tol).lambda1
    m = mask.volume
    gap = m * lam / math.sqrt(det) - math.pi * LAMBDA_BALL
    a = asymmetry(mask, M)
    ratio = gap / a**2 if a > 1e-12 else math.inf
    return FKReport(gap=float(gap), asym=float(a), ratio=float(ratio),
                    m=float(m), lambda_bar=float(lam),
                    positive=bool(gap > 0))


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def emit_report(result, outdir, plots=False):
    """Write sweep.csv and fits.json (and optional log-log plots) to outdir.

    Floats are written with repr so the CSV round-trips bit-exactly.
    """
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "sweep.csv")
    with open(csv_path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for r in result.rows:
            f.write(r.to_csv() + "\n")

    fits_path = os.path.join(outdir, "fits.json")
    with open(fits_path, "w") as f:
        json.dump({name: {"slope": fit.slope, "intercept": fit.intercept,
                          "decreasing": fit.decreasing,
                          "values": list(fit.values)}
                   for name, fit in result.fits.items()}, f, indent=2)

    paths = {"csv": csv_path, "fits": fits_path}
    if plots:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4.5))
        ms = [r.m for r in result.rows]
        for name, fit in result.fits.items():
            ax.loglog(ms, np.abs(fit.values), "o-", label=f"{name} "
                      f"(slope {fit.slope:.2f})")
        ax.set_xlabel("measure m")
        ax.set_ylabel("scale-invariant error")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        png_path = os.path.join(outdir, "sweep.png")
        fig.savefig(png_path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        paths["plot"] = png_path
    return paths


def parse_sweep_csv(path):
    with open(path) as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected sweep CSV header: {header}")
        rows = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 13:
                raise ConfigError(f"bad sweep CSV row: {line}")
            rows.append(SweepRow(*[float(p) for p in parts[:12]],
                                 int(parts[12])))
    return rows


def assert_rows_finite(rows):
    for i, r in enumerate(rows):
        vals = [r.mu, r.m, r.lambda_a, r.lambda_bar_ellipsoid, r.scaled_err,
                r.asym, r.hausdorff_scaled, r.lip_scaled, r.nondeg_scaled,
                r.kappa0, r.strip_P, r.calE]
        if not all(math.isfinite(v) for v in vals):
            raise InternalInconsistencyError(f"non-finite value in sweep row {i}")
