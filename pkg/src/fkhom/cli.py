"""Command-line front end.

Exit codes: 0 when the run's hard checks pass, 1 when a run completes but a
check fails (non-monotone volume map, non-decreasing sweep error, failed
penalty hypothesis, non-converged descent), 2 on configuration or solver
errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import eigsolve
from .cell import homogenize, solve_correctors
from .errors import FkhomError, MonotonicityError
from .fields import ProblemConfig
from .harness import emit_report, rate_sweep
from .masks import DomainMask, asymmetry, density_report, rasterize_ellipsoid
from .optimize import (
    build_penalty,
    default_window,
    ellipsoid_minimizer,
    minimize_J,
    penalty_to_json,
    volume_map,
    write_trace_csv,
)


def _load_config(args):
    if getattr(args, "config", None):
        return ProblemConfig.from_json(args.config)
    return ProblemConfig()


def _homogenized(cfg, field):
    if field.is_constant:
        return homogenize(field)
    n = max(4, int(round(1.0 / cfg.h)))
    return homogenize(field, solve_correctors(field, n=n, tol=cfg.eig.tol))


def cmd_cell(args):
    cfg = _load_config(args)
    field = cfg.build()
    n = args.n if args.n else cfg.cells_per_period
    cor = solve_correctors(field, n=n, tol=cfg.eig.tol)
    H = homogenize(field, cor)
    print(f"kind = {field.kind}  Lambda = {field.lambda_ell:.6g}  n = {n}")
    print(f"abar = [[{H.abar[0, 0]:.12g}, {H.abar[0, 1]:.12g}], "
          f"[{H.abar[1, 0]:.12g}, {H.abar[1, 1]:.12g}]]")
    print(f"det(abar) = {H.det_abar:.12g}")
    print(f"corrector residuals = {cor.residual_norms[0]:.3g}, "
          f"{cor.residual_norms[1]:.3g}")
    print(f"skew discrepancy = {H.skew_discrepancy:.3g}")
    return 0


def cmd_eig(args):
    cfg = _load_config(args)
    field = cfg.build()
    mask = DomainMask.load(args.mask)
    res = eigsolve.eigen(field, mask, k=args.k, tol=cfg.eig.tol,
                         max_iter=cfg.eig.max_iter,
                         dense_cutoff=cfg.eig.dense_cutoff)
    print(f"lambda1 = {res.lambda1!r}")
    if res.lambda2 is not None:
        print(f"lambda2 = {res.lambda2!r}")
        print(f"gap_ratio = {res.lambda2 / res.lambda1 - 1.0:.6g}")
    print(f"volume = {mask.volume!r}  cells = {mask.count}")
    print(f"residual = {res.residual:.3g}  iterations = {res.iterations}")
    if args.diagnostics:
        d = eigsolve.diagnostics(res)
        print(f"lip_scaled = {d.lip_scaled:.6g}")
        print(f"nondeg_scaled = {d.nondeg_scaled:.6g}")
        print(f"sup_scaled = {d.sup_scaled:.6g}")
    return 0


def cmd_optimize(args):
    cfg = _load_config(args)
    field = cfg.build()
    if args.mu <= 0:
        raise FkhomError(f"--mu must be positive, got {args.mu}")
    if args.init:
        init = DomainMask.load(args.init)
    else:
        H = _homogenized(cfg, field)
        window = default_window(args.mu, H, cfg.h, cfg.sweep.margin_periods)
        ell, _ = ellipsoid_minimizer(H, args.mu)
        init = rasterize_ellipsoid(ell, window)
    opt = minimize_J(field, args.mu, init, opts=cfg.opt, tol=cfg.eig.tol)
    print(f"energy = {opt.energy!r}")
    print(f"lambda1 = {opt.lambda1!r}  volume = {opt.volume!r}")
    print(f"iterations = {opt.iterations}  solves = {opt.n_solves}  "
          f"converged = {opt.converged}")
    if args.out:
        opt.mask.save(args.out)
        print(f"wrote {args.out}")
    if args.trace:
        write_trace_csv(opt, args.trace)
        print(f"wrote {args.trace}")
    if not opt.converged:
        print("FAIL: descent did not converge within max_outer iterations")
        return 1
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    field = cfg.build()
    result = rate_sweep(field, h=cfg.h, opts=cfg.sweep, opt_opts=cfg.opt,
                        tol=cfg.eig.tol)
    paths = emit_report(result, args.outdir, plots=args.plots)
    for r in result.rows:
        print(f"m = {r.m:9.4f}  scaled_err = {r.scaled_err:.6g}  "
              f"asym = {r.asym:.6g}  calE = {r.calE:.6g}  iters = {r.iters}")
    for name, fit in result.fits.items():
        print(f"fit {name}: slope = {fit.slope:.3f}  "
              f"decreasing = {fit.decreasing}")
    print(f"wrote {paths['csv']} and {paths['fits']}")
    if not result.fits["scaled_err"].decreasing:
        print("FAIL: scaled_err is not strictly decreasing across levels")
        return 1
    return 0


def cmd_volmap(args):
    cfg = _load_config(args)
    field = cfg.build()
    if not (0 < args.mu_lo < args.mu_hi):
        raise FkhomError(f"need 0 < mu-lo < mu-hi, got {args.mu_lo}, {args.mu_hi}")
    mus = np.geomspace(args.mu_lo, args.mu_hi, args.points)
    try:
        scan = volume_map(field, mus, cfg.h, opt_opts=cfg.opt,
                          sweep_opts=cfg.sweep, tol=cfg.eig.tol)
    except MonotonicityError as exc:
        print(f"FAIL: {exc}")
        return 1
    print("mu,volume,lambda1")
    for r in scan.rows:
        print(f"{r.mu!r},{r.volume!r},{r.lambda1!r}")
    for lo, hi in scan.jumps:
        print(f"jump: volume drop beyond scaling between mu = {lo:.6g} "
              f"and mu = {hi:.6g}")
    return 0


def cmd_metrics(args):
    cfg = _load_config(args)
    mask = DomainMask.load(args.mask)
    field = cfg.build()
    H = _homogenized(cfg, field)
    dens = density_report(mask)
    asym = asymmetry(mask, H.abar)
    print(f"volume = {mask.volume!r}  cells = {mask.count}")
    print(f"perimeter_estimate = {mask.perimeter_estimate()!r}")
    bx, by = mask.barycenter()
    print(f"barycenter = ({bx:.6g}, {by:.6g})")
    print(f"kappa0 = {dens.kappa0:.6g}  kappaU = {dens.kappaU:.6g}  "
          f"strip_P = {dens.strip_P:.6g}")
    print(f"asym = {asym:.6g}")
    return 0


def cmd_penalize(args):
    mask = DomainMask.load(args.target)
    pen = build_penalty(mask, args.mu, p=args.p, gamma0=args.gamma0)
    rep = pen.validate()
    print(f"window = {pen.window.nx} x {pen.window.ny} cells at h = "
          f"{pen.window.h!r}")
    print(f"g range = [{float(pen.g.min())!r}, {float(pen.g.max())!r}]  "
          f"far value = {pen.far_value!r}")
    for key in ("hyp1_two_sided", "hyp2_modulus", "hyp3_far_field",
                "dini_summable"):
        print(f"{key} = {rep[key]}")
    print(f"gamma_eff = {rep['gamma_eff']:.6g}")
    if args.out:
        with open(args.out, "w") as f:
            f.write(penalty_to_json(pen))
        print(f"wrote {args.out}")
    ok = all(rep[k] for k in ("hyp1_two_sided", "hyp2_modulus",
                              "hyp3_far_field", "dini_summable"))
    if not ok:
        print("FAIL: a penalty hypothesis does not hold")
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fkhom",
        description="Homogenized eigenvalue shape optimization on grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cell", help="solve the correctors and print abar")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--n", type=int, default=0, help="torus cells per period")
    p.set_defaults(func=cmd_cell)

    p = sub.add_parser("eig", help="principal eigenvalue on a mask")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mask", required=True, help="mask text file")
    p.add_argument("--k", type=int, default=1, choices=(1, 2))
    p.add_argument("--diagnostics", action="store_true",
                   help="print scale-invariant gradient diagnostics")
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("optimize", help="penalized descent at fixed mu")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--init", help="initial mask file (default: ellipsoid)")
    p.add_argument("--out", help="write the final mask here")
    p.add_argument("--trace", help="write the energy trace CSV here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="doubling-measure convergence sweep")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--outdir", required=True)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("volmap", help="volume of the minimizer along a mu grid")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mu-lo", type=float, required=True, dest="mu_lo")
    p.add_argument("--mu-hi", type=float, required=True, dest="mu_hi")
    p.add_argument("--points", type=int, default=6)
    p.set_defaults(func=cmd_volmap)

    p = sub.add_parser("metrics", help="geometry diagnostics for a mask")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mask", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("penalize", help="build and check a spatial penalty")
    p.add_argument("--target", required=True, help="target mask file")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--p", type=float, default=7.0)
    p.add_argument("--gamma0", type=float, default=0.1)
    p.add_argument("--out", help="write the penalty JSON here")
    p.set_defaults(func=cmd_penalize)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FkhomError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
