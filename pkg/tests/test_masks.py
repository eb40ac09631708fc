import numpy as np
import pytest
from scipy import ndimage

from fkhom import ConfigError, EmptyMaskError, WindowError
from fkhom.masks import (
    DomainMask,
    Ellipsoid,
    GridWindow,
    asymmetry,
    density_report,
    dist_omega,
    distance_to_boundary_cells,
    embed,
    hausdorff_boundary,
    matched_volume_pair,
    omega_modulus,
    random_blob_mask,
    rasterize_ellipsoid,
    symmetric_difference_volume,
)

H32 = 1.0 / 32
BLOB_WINDOW = GridWindow(nx=64, ny=64, h=H32, ox=-1.0, oy=-1.0)
WIDE_WINDOW = GridWindow(nx=128, ny=128, h=H32, ox=-2.0, oy=-2.0)


def unit_square(h, pad=0):
    n = round(1.0 / h)
    nx = n + 2 * pad
    w = GridWindow(nx=nx, ny=nx, h=h, ox=-pad * h, oy=-pad * h)
    occ = np.zeros((nx, nx), dtype=bool)
    occ[pad:pad + n, pad:pad + n] = True
    return DomainMask(w, occ)


def test_mask_text_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    m = random_blob_mask(rng, BLOB_WINDOW)
    path = tmp_path / "blob.mask"
    m.save(path)
    back = DomainMask.load(path)
    assert back.window == m.window
    assert np.array_equal(back.occ, m.occ)
    assert back.to_text() == m.to_text()


@pytest.mark.parametrize("text", [
    "NOTFK 1 2 2 0.5 0.0 0.0\n10\n01\n",
    "FKMASK 2 2 2 0.5 0.0 0.0\n10\n01\n",
    "FKMASK 1 2 2 0.5 0.0 0.0\n10\n",
    "FKMASK 1 2 2 0.5 0.0 0.0\n10\n012\n",
    "FKMASK 1 2 2 0.5 0.0 0.0\n10\nab\n",
])
def test_mask_text_rejects_malformed(text):
    with pytest.raises(ConfigError):
        DomainMask.from_text(text)


def test_mask_shape_validation():
    w = GridWindow(nx=4, ny=4, h=0.25, ox=0.0, oy=0.0)
    with pytest.raises(WindowError):
        DomainMask(w, np.ones((4, 5), dtype=bool))


def test_ellipsoid_volume_and_membership():
    A = np.array([[2.0, 0.3], [0.3, 1.1]])
    E = Ellipsoid.from_tensor(A, rho=0.7, center=(0.2, -0.1))
    assert E.volume == pytest.approx(
        np.sqrt(np.linalg.det(A)) * np.pi * 0.7**2, rel=1e-12)
    E2 = Ellipsoid.of_volume(A, 3.0)
    assert E2.volume == pytest.approx(3.0, rel=1e-12)
    # center is inside; a point far along each axis is not
    assert E.membership(0.2, -0.1)
    assert not E.membership(5.0, 0.0)
    assert E.radial(0.2, -0.1) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigError):
        Ellipsoid.from_tensor(A, rho=-1.0)


def test_rasterize_requires_fitting_window():
    E = Ellipsoid.from_tensor(np.eye(2), 1.0)
    small = GridWindow.covering(-0.5, 0.5, -0.5, 0.5, H32)
    with pytest.raises(WindowError):
        rasterize_ellipsoid(E, small)
    m = rasterize_ellipsoid(E, GridWindow.covering(-1.2, 1.2, -1.2, 1.2, H32))
    assert m.volume == pytest.approx(np.pi, rel=0.01)


def test_distance_to_boundary_square_exact():
    # on a full square the nearest boundary cell center is axis-aligned,
    # so the EDT has closed form h * min(i, j, n-1-i, n-1-j).
    h, n = 1.0 / 16, 16
    sq = unit_square(h)
    ramp = np.minimum(np.arange(n), n - 1 - np.arange(n))
    expect = h * np.minimum(ramp[:, None], ramp[None, :])
    np.testing.assert_allclose(distance_to_boundary_cells(sq), expect,
                               atol=1e-12)


def test_hausdorff_translation():
    m = unit_square(1.0 / 16, pad=6)
    for k in (1, 3):
        shifted = m.translated_cells(k, 0)
        assert hausdorff_boundary(m, shifted) == pytest.approx(k / 16,
                                                               abs=1e-12)
    assert hausdorff_boundary(m, m) == 0.0


def test_symmetric_difference_volume():
    m = unit_square(1.0 / 16, pad=6)
    shifted = m.translated_cells(2, 0)
    # shifting a full square by 2 columns exchanges 2 columns on each side
    assert symmetric_difference_volume(m, shifted) \
        == pytest.approx(2 * 2 * 16 * (1.0 / 16) ** 2, rel=1e-12)
    assert symmetric_difference_volume(m, m) == 0.0


def test_asymmetry_square_oracle():
    # best-fit disk on the unit square: |square Δ disk| / 1 has the
    # closed-form value 4 * (segment area) with |disk| = 1
    sq = unit_square(1.0 / 128, pad=4)
    a = asymmetry(sq, np.eye(2))
    r = 1.0 / np.sqrt(np.pi)
    theta = 2.0 * np.arccos(0.5 / r)
    segment = 0.5 * r**2 * (theta - np.sin(theta))
    oracle = 2.0 * 4.0 * segment
    assert oracle == pytest.approx(0.181092, abs=1e-5)
    assert a == pytest.approx(oracle, rel=0.01)


def test_asymmetry_ellipse_floor():
    A = np.diag([1.5, 0.8])
    w = GridWindow.covering(-1.3, 1.3, -1.3, 1.3, 1.0 / 64)
    m = rasterize_ellipsoid(Ellipsoid.from_tensor(A, 1.0), w)
    # a rasterized ellipse is its own best fit up to raster error
    assert asymmetry(m, A) <= 0.02


def test_density_report_disk():
    w = GridWindow.covering(-1.2, 1.2, -1.2, 1.2, H32)
    disk = rasterize_ellipsoid(Ellipsoid.from_tensor(np.eye(2), 1.0), w)
    rep = density_report(disk)
    assert 0.15 < rep.kappa0 < 0.35
    assert rep.kappa0 * rep.kappaU <= 4.0
    # boundary strip of width t has area ~ perimeter * t, so
    # strip_P ~ 2 pi / sqrt(pi) = 2 sqrt(pi)
    assert rep.strip_P == pytest.approx(2 * np.sqrt(np.pi), rel=0.10)
    assert rep.n_boundary_samples > 0


def test_density_kappa_relation_corpus():
    # frozen corpus: the doubling constant is controlled by the inverse
    # density, kappa0 * kappaU <= 4
    rng = np.random.default_rng(42)
    for _ in range(8):
        blob = random_blob_mask(rng, BLOB_WINDOW, fill=0.25)
        rep = density_report(blob)
        assert 0.0 < rep.kappa0 <= 0.5
        assert rep.kappa0 * rep.kappaU <= 4.0


def test_hausdorff_upgrade_corpus():
    # measure closeness upgrades to Hausdorff closeness:
    # d_H(U, E) <= sqrt(|U Δ E| / kappa0(U)) on the frozen corpus
    rng = np.random.default_rng(42)
    for _ in range(8):
        blob = random_blob_mask(rng, BLOB_WINDOW, fill=0.25)
        kappa0 = density_report(blob).kappa0
        _, E = asymmetry(blob, np.eye(2), return_ellipsoid=True)
        blob_w = embed(blob, WIDE_WINDOW)
        Em = rasterize_ellipsoid(E, WIDE_WINDOW)
        sd = symmetric_difference_volume(blob_w, Em)
        if sd == 0.0:
            continue
        assert hausdorff_boundary(blob_w, Em) <= np.sqrt(sd / kappa0)


def test_omega_modulus_properties():
    s = np.array([0.0, 1e-6, 1e-3, 0.1, 1.0, 10.0])
    w = omega_modulus(s, p=7.0)
    assert w[0] == 0.0
    assert np.all(np.diff(w) > 0)
    assert w[1] == pytest.approx(np.log(2 + 1e6) ** -7.0, rel=1e-12)
    capped = omega_modulus(s, p=7.0, gamma=0.05)
    assert capped.max() <= 0.05


def test_dist_omega_properties():
    rng = np.random.default_rng(5)
    A, B = matched_volume_pair(rng, BLOB_WINDOW)
    assert dist_omega(A, A, p=7.0, gamma=0.1) == 0.0
    d = dist_omega(A, B, p=7.0, gamma=0.1)
    assert d > 0.0
    # the capped weight is at most gamma on every differing cell
    assert d <= 0.1 * symmetric_difference_volume(A, B) + 1e-12
    # asymmetric in the reference: weights use B's boundary and volume
    assert dist_omega(B, A, p=7.0, gamma=0.1) != pytest.approx(d, rel=1e-6)


def test_dist_omega_parameter_validation():
    rng = np.random.default_rng(5)
    A, B = matched_volume_pair(rng, BLOB_WINDOW)
    with pytest.raises(ConfigError):
        dist_omega(A, B, p=6.0, gamma=0.1)
    with pytest.raises(ConfigError):
        dist_omega(A, B, p=7.0, gamma=14.0)  # above the log(2)^-p cap
    with pytest.raises(ConfigError):
        dist_omega(A, B, p=7.0, gamma=0.0)
    empty = DomainMask(BLOB_WINDOW, np.zeros((64, 64), dtype=bool))
    with pytest.raises(EmptyMaskError):
        dist_omega(A, empty, p=7.0, gamma=0.1)


def test_matched_volume_pair_counts():
    for seed in (0, 1, 2):
        A, B = matched_volume_pair(np.random.default_rng(seed), BLOB_WINDOW)
        assert A.count == B.count > 0
        assert np.any(A.occ ^ B.occ)


def test_random_blob_connected():
    for seed in (0, 3, 9):
        blob = random_blob_mask(np.random.default_rng(seed), BLOB_WINDOW)
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
        _, nlab = ndimage.label(blob.occ, structure=structure)
        assert nlab == 1


def test_embed_preserves_cells():
    rng = np.random.default_rng(1)
    blob = random_blob_mask(rng, BLOB_WINDOW)
    wide = embed(blob, WIDE_WINDOW)
    assert wide.count == blob.count
    assert wide.volume == pytest.approx(blob.volume, rel=1e-12)
    small = GridWindow(nx=8, ny=8, h=H32, ox=-1.0, oy=-1.0)
    with pytest.raises(WindowError):
        embed(blob, small)
