import json

import numpy as np
import pytest

from fkhom import ConfigError, EllipticityError, ProblemConfig, build_field
from fkhom.fields import FIELD_KINDS, EigOptions


def test_constant_matrix_roundtrip():
    M = [[2.0, 0.3], [0.3, 1.5]]
    f = build_field("constant", {"matrix": M})
    assert f.is_constant
    np.testing.assert_allclose(f.matrix, M)


def test_constant_asymmetric_rejected():
    with pytest.raises(EllipticityError):
        build_field("constant", {"matrix": [[2.0, 0.3], [0.1, 1.5]]})


def test_lambda_certificates():
    # laminate(1,4): eigenvalues within [1,4]; Lambda = max(4, 1/1) = 4
    lam = build_field("laminate", {"alpha": 1.0, "beta": 4.0}).lambda_ell
    assert lam == pytest.approx(4.0, abs=1e-12)
    # trig(2,1): scalar range [1,3]; the sampled certificate sits just
    # below the continuum sup because the grid misses the peak.
    tr = build_field("trig", {"c": 2.0, "A": 1.0}).lambda_ell
    assert 2.9 < tr <= 3.0 + 1e-12
    assert build_field("checkerboard", {"alpha": 1.0, "beta": 4.0}).lambda_ell \
        == pytest.approx(4.0, abs=1e-12)


def test_ellipticity_loss_rejected():
    with pytest.raises(EllipticityError):
        build_field("trig", {"c": 1.0, "A": 1.0})
    with pytest.raises(EllipticityError):
        build_field("laminate", {"alpha": -1.0, "beta": 4.0})


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        build_field("random", {"alpha": 1.0, "beta": 2.0})
    assert set(FIELD_KINDS) == {"constant", "laminate", "checkerboard", "trig"}


def test_periodicity():
    f = build_field("trig", {"c": 2.0, "A": 1.0})
    x = np.linspace(0.0, 1.0, 13)
    y = np.linspace(0.0, 1.0, 13)
    np.testing.assert_allclose(f.sample(x, y), f.sample(x + 1.0, y - 2.0),
                               atol=1e-12)


def test_laminate_profile_values():
    f = build_field("laminate", {"alpha": 1.0, "beta": 4.0},
                    cells_per_period=64)
    a = f.sample(np.array([0.25, 0.75, 0.5, 0.0]), np.zeros(4))
    # plateau values away from the jumps; exact midpoints on the ramps
    assert a[0, 0, 0] == pytest.approx(1.0)
    assert a[1, 0, 0] == pytest.approx(4.0)
    assert a[2, 0, 0] == pytest.approx(2.5)
    assert a[3, 0, 0] == pytest.approx(2.5)
    assert np.all(a[:, 0, 1] == 0.0) and np.all(a[:, 1, 0] == 0.0)


def test_checkerboard_face_rule():
    f = build_field("checkerboard", {"alpha": 1.0, "beta": 4.0})
    from fkhom.masks import GridWindow

    w = GridWindow(nx=16, ny=16, h=1.0 / 16, ox=0.0, oy=0.0)
    ax, ay = f.face_components(w)
    assert ax.shape == (16, 17) and ay.shape == (17, 16)
    # the face on the phase interface x = 1/2 averages the two phases
    assert ax[0, 8] == pytest.approx(2.5)
    # interior faces sit inside a single phase
    assert ax[0, 4] == pytest.approx(1.0)
    assert ax[12, 4] == pytest.approx(4.0)


def test_config_defaults_and_build():
    cfg = ProblemConfig()
    f = cfg.build()
    assert f.is_constant and cfg.dim == 2
    assert cfg.h == pytest.approx(1.0 / 16)


def test_config_json_roundtrip():
    cfg = ProblemConfig.from_json(json.dumps({
        "coeff": {"kind": "trig", "params": {"c": 2.0, "A": 1.0}},
        "grid": {"h": 0.03125, "cells_per_period": 32},
        "eig": {"tol": 1e-9},
    }))
    assert cfg.coeff_kind == "trig" and cfg.h == 0.03125
    assert cfg.eig.tol == 1e-9 and cfg.eig.max_iter == EigOptions().max_iter
    again = ProblemConfig.from_json(cfg.to_json())
    assert again == cfg


@pytest.mark.parametrize("raw", [
    '{"bogus": 1}',
    '{"coeff": {"kind": "trig", "params": {"c": 2, "A": 1}, "extra": 0}}',
    '{"grid": {"h": 0.1, "n": 3}}',
    '{"eig": {"tolerance": 1e-8}}',
    '{"sweep": {"nlevels": 2}}',
    '{"grid": 5}',
    '{"coeff": [1, 2]}',
    '{bad json',
    '{"dim": 3}',
    '{"coeff": {"kind": "trig", "params": {"c": 1.0, "A": 3.0}}}',
])
def test_config_rejects_bad_input(raw):
    with pytest.raises((ConfigError, EllipticityError)):
        ProblemConfig.from_json(raw)


def test_config_rejects_bad_scalars():
    with pytest.raises(ConfigError):
        ProblemConfig(h=-0.1)
    with pytest.raises(ConfigError):
        ProblemConfig(cells_per_period=2)
