"""Periodic coefficient fields and run configuration.

A coefficient field is a symmetric, uniformly elliptic 2x2 matrix function
a(x) with unit period in both directions.  Fields are defined by closed-form
kinds so every sample is reproducible bit-for-bit:

* ``constant``      -- a fixed symmetric matrix M (off-diagonals allowed),
* ``laminate``      -- diag(s(x1), s(x1)) with s piecewise alpha/beta on
                       half-periods, linearly smoothed over one grid cell at
                       the jumps,
* ``checkerboard``  -- scalar alpha/beta on alternating half-period squares
                       (discontinuous; admitted for cell-problem validation),
* ``trig``          -- (c + A sin(2 pi x1) sin(2 pi x2)) * Id, smooth.

Ellipticity is certified at construction: Lambda >= 1 is the smallest
constant with Lambda^-1 |xi|^2 <= xi . a xi <= Lambda |xi|^2 over the
period-cell sample grid, computed from exact 2x2 eigenvalues.  ``lip_bound``
is a finite-difference estimate of max |grad a| on the same grid (0 for
constant fields, O(n (beta-alpha)) for the smoothed/discontinuous kinds).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Any

import numpy as np

from .errors import ConfigError, EllipticityError

FIELD_KINDS = ("constant", "laminate", "checkerboard", "trig")

# Face-sampling conventions per kind.  "pointwise": evaluate the formula at
# the face center.  "cell_average": arithmetic mean of the two adjacent cell
# centers (needed so discontinuous checkerboard faces get a defined value).
_FACE_RULES = {
    "constant": "pointwise",
    "laminate": "pointwise",
    "checkerboard": "cell_average",
    "trig": "pointwise",
}


def _sym2x2_eig_bounds(mats):
    """Exact eigenvalue range of a (..., 2, 2) symmetric stack."""
    a = mats[..., 0, 0]
    b = mats[..., 1, 1]
    c = mats[..., 0, 1]
    half_tr = 0.5 * (a + b)
    disc = np.sqrt(0.25 * (a - b) ** 2 + c**2)
    return float(np.min(half_tr - disc)), float(np.max(half_tr + disc))


@dataclass(frozen=True)
class CoeffField:
    """A periodic coefficient field with certified ellipticity.

    ``values`` realizes the map from cell-face sample points of the n x n
    periodic grid to 2x2 matrices: ``values["xface"][iy, ix]`` is a at
    (ix*h, (iy+0.5)*h) and ``values["yface"][iy, ix]`` at
    ((ix+0.5)*h, iy*h), h = 1/n.
    """

    kind: str
    params: dict
    cells_per_period: int
    lambda_ell: float
    lip_bound: float
    values: dict

    # -- evaluation ---------------------------------------------------------

    def sample(self, x, y):
        """Evaluate a at arbitrary points (periodic wrap); returns (..., 2, 2)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return _evaluate(self.kind, self.params, self.cells_per_period, x, y)

    @property
    def is_constant(self):
        return self.kind == "constant"

    @property
    def matrix(self):
        if not self.is_constant:
            raise ValueError("matrix is only defined for constant fields")
        return np.array(self.params["matrix"], dtype=float)

    @property
    def is_diagonal(self):
        if self.kind == "constant":
            return abs(self.params["matrix"][0][1]) == 0.0
        return True  # every non-constant kind is diagonal by construction

    def face_components(self, window):
        """(a11 on x-faces, a22 on y-faces) for a grid window.

        x-faces: shape (ny, nx+1), face i left of cell i; y-faces (ny+1, nx).
        Uses the kind's face rule; requires a diagonal field.
        """
        if not self.is_diagonal:
            raise EllipticityError(
                "face-based stencils need a grid-aligned (diagonal) field"
            )
        h, ox, oy = window.h, window.ox, window.oy
        xf_x = ox + h * np.arange(window.nx + 1)
        cen_x = ox + h * (np.arange(window.nx) + 0.5)
        cen_y = oy + h * (np.arange(window.ny) + 0.5)
        yf_y = oy + h * np.arange(window.ny + 1)
        if _FACE_RULES[self.kind] == "pointwise":
            ax = self.sample(xf_x[None, :], cen_y[:, None])[..., 0, 0]
            ay = self.sample(cen_x[None, :], yf_y[:, None])[..., 1, 1]
        else:
            # arithmetic mean of the two adjacent cell-center values
            gx = np.concatenate(([cen_x[0] - h], cen_x, [cen_x[-1] + h]))
            gy = np.concatenate(([cen_y[0] - h], cen_y, [cen_y[-1] + h]))
            cx = self.sample(gx[None, :], cen_y[:, None])[..., 0, 0]
            ax = 0.5 * (cx[:, :-1] + cx[:, 1:])
            cy = self.sample(cen_x[None, :], gy[:, None])[..., 1, 1]
            ay = 0.5 * (cy[:-1, :] + cy[1:, :])
        return ax, ay


def _laminate_profile(x, alpha, beta, n):
    """Piecewise alpha/beta on half-periods, linear ramps of width 1/n
    centered at the jumps x1 = 0 and x1 = 1/2."""
    y = np.mod(x, 1.0)
    w = 0.5 / n
    out = np.where(y < 0.5, alpha, beta).astype(float)
    # ramp at 1/2: alpha -> beta
    m = np.abs(y - 0.5) <= w
    out = np.where(m, alpha + (beta - alpha) * (y - (0.5 - w)) / (2 * w), out)
    # ramp at 0 (wrap): beta -> alpha
    d = np.minimum(y, 1.0 - y)
    m0 = d <= w
    s0 = np.where(y < 0.5, y, y - 1.0)  # signed distance to the 0-jump
    out = np.where(m0, beta + (alpha - beta) * (s0 + w) / (2 * w), out)
    return out


def _evaluate(kind, params, n, x, y):
    x, y = np.broadcast_arrays(x, y)
    out = np.zeros(x.shape + (2, 2), dtype=float)
    if kind == "constant":
        out[...] = np.array(params["matrix"], dtype=float)
    elif kind == "laminate":
        s = _laminate_profile(x, params["alpha"], params["beta"], n)
        out[..., 0, 0] = s
        out[..., 1, 1] = s
    elif kind == "checkerboard":
        xi = np.floor(2.0 * np.mod(x, 1.0)).astype(int)
        yi = np.floor(2.0 * np.mod(y, 1.0)).astype(int)
        s = np.where((xi + yi) % 2 == 0, params["alpha"], params["beta"])
        out[..., 0, 0] = s
        out[..., 1, 1] = s
    elif kind == "trig":
        s = params["c"] + params["A"] * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
        out[..., 0, 0] = s
        out[..., 1, 1] = s
    else:
        raise ConfigError(f"unknown field kind {kind!r}")
    return out


def _validate_params(kind, params):
    if kind == "constant":
        m = np.array(params.get("matrix", np.nan), dtype=float)
        if m.shape != (2, 2):
            raise ConfigError("constant field needs a 2x2 'matrix'")
        if abs(m[0, 1] - m[1, 0]) > 1e-12 * (1 + abs(m[0, 1])):
            raise EllipticityError(f"matrix not symmetric: {m.tolist()}")
        return {"matrix": [[float(m[0, 0]), float(m[0, 1])],
                           [float(m[1, 0]), float(m[1, 1])]]}
    if kind in ("laminate", "checkerboard"):
        try:
            a, b = float(params["alpha"]), float(params["beta"])
        except KeyError as e:
            raise ConfigError(f"{kind} field needs alpha and beta") from e
        if min(a, b) <= 0:
            raise EllipticityError(f"{kind} phases must be positive, got {a}, {b}")
        return {"alpha": a, "beta": b}
    if kind == "trig":
        try:
            c, A = float(params["c"]), float(params["A"])
        except KeyError as e:
            raise ConfigError("trig field needs c and A") from e
        if c - abs(A) <= 0:
            raise EllipticityError(f"trig field not elliptic: c - |A| = {c - abs(A)}")
        return {"c": c, "A": A}
    raise ConfigError(f"unknown field kind {kind!r}; expected one of {FIELD_KINDS}")


def build_field(kind, params, cells_per_period=64):
    """Construct and certify a coefficient field.

    cells_per_period must be >= 4.  Raises EllipticityError with the offending
    minimum eigenvalue if the sampled field is not uniformly elliptic.
    """
    n = int(cells_per_period)
    if n < 4:
        raise ConfigError(f"cells_per_period must be >= 4, got {n}")
    params = _validate_params(kind, params)

    h = 1.0 / n
    cen = h * (np.arange(n) + 0.5)
    edge = h * np.arange(n)
    xface = _evaluate(kind, params, n, edge[None, :], cen[:, None])
    yface = _evaluate(kind, params, n, cen[None, :], edge[:, None])
    cells = _evaluate(kind, params, n, cen[None, :], cen[:, None])

    lo = min(_sym2x2_eig_bounds(xface)[0], _sym2x2_eig_bounds(yface)[0],
             _sym2x2_eig_bounds(cells)[0])
    hi = max(_sym2x2_eig_bounds(xface)[1], _sym2x2_eig_bounds(yface)[1],
             _sym2x2_eig_bounds(cells)[1])
    if lo <= 0:
        raise EllipticityError(f"field loses ellipticity: min eigenvalue {lo}")
    lam = max(hi, 1.0 / lo, 1.0)

    # discrete Lipschitz estimate on the cell-center grid (periodic wrap)
    dx = (np.roll(cells, -1, axis=1) - cells) / h
    dy = (np.roll(cells, -1, axis=0) - cells) / h
    lip = float(max(np.max(np.abs(dx)), np.max(np.abs(dy))))

    return CoeffField(
        kind=kind,
        params=params,
        cells_per_period=n,
        lambda_ell=float(lam),
        lip_bound=lip,
        values={"xface": xface, "yface": yface},
    )


def identity_field(scale=1.0, cells_per_period=16):
    """Convenience constant field scale * Id."""
    return build_field(
        "constant", {"matrix": [[scale, 0.0], [0.0, scale]]}, cells_per_period
    )


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigOptions:
    tol: float = 1e-10
    max_iter: int = 20000
    dense_cutoff: int = 400


@dataclass(frozen=True)
class OptOptions:
    max_outer: int = 60
    stall_iters: int = 3
    thresholds: int = 32
    min_cells: int = 4
    cand_tol: float = 1e-8  # eigen tolerance while ranking candidates


@dataclass(frozen=True)
class SweepOptions:
    levels: int = 4
    m0: float = 16.0
    mu_points: int = 8
    warm_start: bool = True
    jump_frac: float = 0.05
    margin_periods: float = 2.0
    seed: int = 0
    plots: bool = False


_SECTION_FIELDS = {
    "eig": EigOptions,
    "opt": OptOptions,
    "sweep": SweepOptions,
}


@dataclass(frozen=True)
class ProblemConfig:
    """Validated run configuration (see from_json for the file schema)."""

    coeff_kind: str = "constant"
    coeff_params: dict = dc_field(
        default_factory=lambda: {"matrix": [[1.0, 0.0], [0.0, 1.0]]}
    )
    dim: int = 2
    h: float = 1.0 / 16
    cells_per_period: int = 64
    eig: EigOptions = dc_field(default_factory=EigOptions)
    opt: OptOptions = dc_field(default_factory=OptOptions)
    sweep: SweepOptions = dc_field(default_factory=SweepOptions)

    def __post_init__(self):
        if self.dim != 2:
            raise ConfigError(f"only dim = 2 is implemented, got {self.dim}")
        if not (self.h > 0):
            raise ConfigError(f"grid.h must be positive, got {self.h}")
        if self.cells_per_period < 4:
            raise ConfigError(
                f"grid.cells_per_period must be >= 4, got {self.cells_per_period}"
            )
        for name in ("eig", "opt", "sweep"):
            sec = getattr(self, name)
            for k, v in vars(sec).items():
                if isinstance(v, (int, float)) and not isinstance(v, bool) and v <= 0:
                    if k in ("tol", "max_iter", "dense_cutoff", "max_outer",
                             "stall_iters", "thresholds", "min_cells", "cand_tol",
                             "levels", "m0", "mu_points", "jump_frac",
                             "margin_periods"):
                        raise ConfigError(f"{name}.{k} must be positive, got {v}")

    def build(self):
        """Materialize the configured coefficient field."""
        return build_field(self.coeff_kind, self.coeff_params, self.cells_per_period)

    @classmethod
    def from_json(cls, path_or_text):
        """Parse a JSON config.

        Top-level keys: ``dim``, ``coeff`` ({"kind", "params"}), ``grid``
        ({"h", "cells_per_period"}), ``eig``, ``opt``, ``sweep``.  Unknown
        keys anywhere are rejected.
        """
        text = path_or_text
        if not text.lstrip().startswith("{"):
            with open(path_or_text) as f:
                text = f.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")

        allowed = {"dim", "coeff", "grid", "eig", "opt", "sweep"}
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for name in allowed - {"dim"}:
            if name in raw and not isinstance(raw[name], dict):
                raise ConfigError(f"config section {name!r} must be an object")

        kwargs: dict[str, Any] = {}
        kwargs["dim"] = int(raw.get("dim", 2))

        coeff = raw.get("coeff", {})
        extra = set(coeff) - {"kind", "params"}
        if extra:
            raise ConfigError(f"unknown coeff keys: {sorted(extra)}")
        if coeff:
            kwargs["coeff_kind"] = coeff.get("kind", "constant")
            kwargs["coeff_params"] = coeff.get("params", {})

        grid = raw.get("grid", {})
        extra = set(grid) - {"h", "cells_per_period"}
        if extra:
            raise ConfigError(f"unknown grid keys: {sorted(extra)}")
        if "h" in grid:
            kwargs["h"] = float(grid["h"])
        if "cells_per_period" in grid:
            kwargs["cells_per_period"] = int(grid["cells_per_period"])

        for name, klass in _SECTION_FIELDS.items():
            sec = raw.get(name, {})
            known = set(klass.__dataclass_fields__)
            extra = set(sec) - known
            if extra:
                raise ConfigError(f"unknown {name} keys: {sorted(extra)}")
            if sec:
                kwargs[name] = klass(**sec)

        cfg = cls(**kwargs)
        # fail early on bad coefficient parameters, not at first use
        _validate_params(cfg.coeff_kind, cfg.coeff_params)
        return cfg

    def to_json(self):
        return json.dumps(
            {
                "dim": self.dim,
                "coeff": {"kind": self.coeff_kind, "params": self.coeff_params},
                "grid": {"h": self.h, "cells_per_period": self.cells_per_period},
                "eig": vars(self.eig),
                "opt": vars(self.opt),
                "sweep": vars(self.sweep),
            },
            indent=2,
        )
