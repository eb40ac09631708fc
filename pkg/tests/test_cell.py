import numpy as np
import pytest

from fkhom import ConfigError, build_field, identity_field
from fkhom.cell import (
    _energy_form,
    corrected_trial,
    directional_energy,
    homogenize,
    solve_correctors,
)
from fkhom.masks import Ellipsoid


def test_constant_field_homogenizes_to_itself():
    M = np.array([[2.0, 0.4], [0.4, 1.3]])
    f = build_field("constant", {"matrix": M.tolist()})
    hom = homogenize(f)
    np.testing.assert_allclose(hom.abar, M, atol=1e-10)
    assert hom.det_abar == pytest.approx(np.linalg.det(M), rel=1e-12)
    np.testing.assert_allclose(hom.sqrt_abar @ hom.sqrt_abar, M, atol=1e-12)


def test_laminate_harmonic_arithmetic_means():
    # alpha=1, beta=4 in equal halves: harmonic mean 1.6 across the layers,
    # arithmetic mean 2.5 along them.  The along-layer entry is exact because
    # the corrector component vanishes identically in that direction.
    f = build_field("laminate", {"alpha": 1.0, "beta": 4.0},
                    cells_per_period=128)
    hom = homogenize(f, solve_correctors(f, n=128))
    assert hom.abar[0, 0] == pytest.approx(1.6, rel=0.01)
    assert hom.abar[1, 1] == pytest.approx(2.5, abs=1e-9)
    assert abs(hom.abar[0, 1]) < 1e-10
    assert hom.skew_discrepancy < 1e-10


def test_checkerboard_geometric_mean():
    # two-phase checkerboard: the effective tensor is sqrt(alpha*beta) Id.
    f = build_field("checkerboard", {"alpha": 1.0, "beta": 4.0},
                    cells_per_period=128)
    hom = homogenize(f, solve_correctors(f, n=128))
    np.testing.assert_allclose(hom.abar, 2.0 * np.eye(2), rtol=0.02)
    assert hom.abar[0, 0] == pytest.approx(hom.abar[1, 1], rel=1e-8)


def test_trig_self_convergence(trig_field, trig_abar):
    ref = homogenize(trig_field, solve_correctors(trig_field, n=256)).abar
    err64 = np.max(np.abs(trig_abar.abar - ref))
    err128 = np.max(
        np.abs(homogenize(trig_field, solve_correctors(trig_field, n=128)).abar
               - ref))
    assert err128 < err64 < 1e-6
    assert trig_abar.abar[0, 0] == pytest.approx(1.9353592, rel=1e-5)
    assert abs(trig_abar.abar[0, 1]) < 1e-10


def test_corrector_energy_optimality(trig_field, trig_correctors):
    # the corrector minimizes the cell energy: any perturbation of chi_1
    # can only raise the (0,0) energy entry.
    chi1 = trig_correctors.chi[0]
    base = _energy_form(trig_field, trig_correctors, 0, 0, chi1, chi1)
    rng = np.random.default_rng(3)
    for _ in range(3):
        pert = rng.standard_normal(chi1.shape)
        pert -= pert.mean()
        bumped = chi1 + 1e-3 * pert
        assert _energy_form(trig_field, trig_correctors, 0, 0, bumped, bumped) \
            > base


def test_directional_energy_matches_tensor(trig_field, trig_correctors,
                                           trig_abar):
    rng = np.random.default_rng(7)
    for _ in range(4):
        q1 = rng.standard_normal(2)
        q2 = rng.standard_normal(2)
        val = directional_energy(trig_field, trig_correctors, q1, q2)
        assert val == pytest.approx(float(q1 @ trig_abar.abar @ q2), abs=1e-10)


def test_corrected_trial_constant_field():
    ident = identity_field()
    corr = solve_correctors(ident, n=16)
    hom = homogenize(ident, corr)
    rho = np.sqrt(16.0 / np.pi)
    E = Ellipsoid.from_tensor(hom.abar, rho)
    rep = corrected_trial(E, hom, corr, ident, h=1.0 / 16)
    # no oscillation: the only loss is the cutoff layer
    assert 0.0 < rep.excess < 1e-2
    assert rep.rayleigh > rep.lambda_ref


def test_corrected_trial_oscillatory(trig_field, trig_correctors, trig_abar):
    reports = []
    for vol in (16.0, 32.0, 64.0):
        rho = np.sqrt(vol / (np.pi * np.sqrt(trig_abar.det_abar)))
        E = Ellipsoid.from_tensor(trig_abar.abar, rho)
        reports.append(
            corrected_trial(E, trig_abar, trig_correctors, trig_field,
                            h=1.0 / 16))
    excess = [r.excess for r in reports]
    assert all(e > 0 for e in excess)
    assert excess[0] > excess[-1]
    assert all(r.excess_const <= 0.05 for r in reports)


def test_corrected_trial_rejects_mismatched_tensor(trig_field,
                                                   trig_correctors,
                                                   trig_abar):
    E = Ellipsoid.from_tensor(trig_abar.abar, 2.0)
    with pytest.raises(ConfigError):
        corrected_trial(E, np.eye(2), trig_correctors, trig_field, h=1.0 / 16)
    with pytest.raises(ConfigError):
        corrected_trial(E, trig_abar, trig_correctors, trig_field, t=1.5,
                        h=1.0 / 16)


def test_correctors_mean_zero_and_periodic(trig_correctors):
    for k in range(2):
        assert abs(trig_correctors.chi[k].mean()) < 1e-12
    assert trig_correctors.residual_norms.max() < 1e-8
    # sampling at x and x+1 must agree
    x = np.linspace(0.1, 0.9, 5)
    a = trig_correctors.sample(x, x)
    b = trig_correctors.sample(x + 1.0, x - 1.0)
    np.testing.assert_allclose(a, b, atol=1e-12)
