import numpy as np
import pytest

from nonlocal_poisson.errors import ConfigurationError, DomainError
from nonlocal_poisson.geometry import (
    Disk, Hemisphere, disk_bump, disk_linear, disk_paraboloid, hemisphere_x, hemisphere_z2,
)
from nonlocal_poisson.kernels import KernelFamily
from nonlocal_poisson.operators import (
    QuadratureGrid, adjointness_gap, apply_operator, boundary_residual_l2, decay_slope,
    gauss_legendre, interior_probes, interior_residual_rms, truncation_boundary, truncation_interior,
)

HEMI = QuadratureGrid(Hemisphere(), 200)
DISK = QuadratureGrid(Disk(), 200)


def chart_midpoint(manifold, ns=1500, nt=3000):
    """Oracle: plain midpoint rule on the polar chart, independent of the local rules."""
    s = (np.arange(ns) + 0.5) * manifold.radial_extent / ns
    t = (np.arange(nt) + 0.5) * 2 * np.pi / nt
    S, T = np.meshgrid(s, t, indexing="ij")
    pts = manifold.chart(S.ravel(), T.ravel())
    w = manifold.area_element(S.ravel(), T.ravel()) * (manifold.radial_extent / ns) * (2 * np.pi / nt)
    return pts, w


def boundary_midpoint(manifold, nb=20000):
    t = (np.arange(nb) + 0.5) * 2 * np.pi / nb
    return t, manifold.boundary_chart(t), manifold.boundary_length_element(t) * 2 * np.pi / nb


@pytest.fixture(scope="module")
def hemi_mid():
    return chart_midpoint(Hemisphere())


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(6, 0.5, 2.0)
    assert np.sum(w * x**11) == pytest.approx((2.0**12 - 0.5**12) / 12, rel=1e-13)


def test_local_interior_rule_measures_cap_area():
    m = Hemisphere()
    x = m.chart(np.array(0.3), np.array(1.0))
    for delta in (0.05, 0.2):
        _, w = HEMI.local_interior(x, 2 * delta)
        rho = 2 * np.arcsin(delta)
        assert w.sum() == pytest.approx(2 * np.pi * (1 - np.cos(rho)), rel=1e-12)


def test_local_rule_near_boundary_cuts_the_ball():
    m = Disk()
    x = np.array([0.95, 0.0])
    _, w = DISK.local_interior(x, 0.2)
    # area of a disk of radius 0.2 centred 0.05 inside a unit circle, by fine grid
    g = np.linspace(-0.2, 0.2, 4001)
    X, Y = np.meshgrid(g + 0.95, g)
    inside = ((X - 0.95) ** 2 + Y**2 <= 0.04) & (X**2 + Y**2 <= 1)
    assert w.sum() == pytest.approx(inside.sum() * (g[1] - g[0]) ** 2, rel=2e-3)


@pytest.mark.parametrize("which,field", [("L", "u"), ("P", "f")])
def test_interior_operators_match_midpoint_oracle(which, field, hemi_mid):
    p = hemisphere_z2()
    delta = 0.2
    ker = KernelFamily(delta)
    pts, w = hemi_mid
    x = Hemisphere().chart(np.array(0.7), np.array(0.4))
    got = apply_operator(which, x, delta, HEMI, p.u_exact if field == "u" else p.f)
    if which == "L":
        want = np.sum((p.u_exact(x) - p.u_exact(pts)) * ker.eval_scaled(0, x, pts) * w) / delta**2
    else:
        want = np.sum(p.f(pts) * ker.eval_scaled(1, x, pts) * w)
    assert got == pytest.approx(want, rel=1e-5)


def test_boundary_operators_match_midpoint_oracle(hemi_mid):
    p = hemisphere_x()
    m = p.manifold
    delta = 0.2
    ker = KernelFamily(delta)
    pts, w = hemi_mid
    q = m.boundary_chart(np.array(1.1))
    n = m.conormal_at(q)
    proj = (q - pts) @ n
    rbar = ker.eval_scaled(1, q, pts) * w
    assert apply_operator("D", q, delta, HEMI, p.u_exact) == pytest.approx(np.sum(p.u_exact(pts) * 2 * rbar), rel=1e-5)
    assert apply_operator("Q", q, delta, HEMI, p.f) == pytest.approx(
        -2 * delta**2 * np.sum(p.f(pts) * ker.eval_scaled(2, q, pts) * w), rel=1e-5)
    assert apply_operator("Ptilde", q, delta, HEMI) == pytest.approx(np.sum(2 * rbar), rel=1e-5)
    # interior point near the boundary: G and S against a fine boundary sum
    x = m.chart(np.array(m.radial_extent - 0.1), np.array(1.0))
    t, yb, wb = boundary_midpoint(m)
    diff = x - yb
    rb = ker.eval_scaled(1, x, yb) * wb
    pr = np.sum(diff * m.conormal(t), axis=1)
    s_field = lambda y: 1 + y[..., 0]
    assert apply_operator("G", x, delta, HEMI, s_field) == pytest.approx(np.sum(s_field(yb) * 2 * rb), rel=1e-6)
    assert apply_operator("S", x, delta, HEMI, p.laplacian_boundary_g) == pytest.approx(
        -np.sum(pr * p.laplacian_boundary_g(yb) * rb), rel=1e-6)


@pytest.mark.parametrize("manifold", [Hemisphere(), Disk()])
def test_rtilde_first_term_and_sign(manifold):
    grid = HEMI if isinstance(manifold, Hemisphere) else DISK
    delta = 0.2
    ker = KernelFamily(delta)
    q = manifold.boundary_chart(np.array(0.3))
    _, yb, wb = boundary_midpoint(manifold)
    first = 4 * delta**2 * np.sum(ker.eval_scaled(2, q, yb) * wb)
    rt = apply_operator("Rtilde", q, delta, grid)
    if isinstance(manifold, Hemisphere):
        assert rt == pytest.approx(first, rel=1e-8)
    else:
        # kappa_n = -1 makes the curvature term add to the boundary term
        assert rt > first > 0


def test_quadrature_converged_at_resolution_200():
    p = disk_bump()
    x = np.array([0.2, -0.5])
    q = Disk().boundary_chart(np.array(2.0))
    fine = QuadratureGrid(Disk(), 400)
    assert truncation_interior(p, 0.2, x, DISK) == pytest.approx(truncation_interior(p, 0.2, x, fine), abs=1e-12)
    assert truncation_boundary(p, 0.2, q, DISK) == pytest.approx(truncation_boundary(p, 0.2, q, fine), abs=1e-12)


def test_linear_data_annihilated_in_flat_interior():
    # away from the boundary L x = 0 and P 0 = 0 on a flat disk
    p = disk_linear()
    x = np.array([0.1, 0.2])
    assert abs(truncation_interior(p, 0.1, x, DISK)) < 1e-12


def test_interior_truncation_second_order():
    for p, grid in ((hemisphere_z2(), HEMI), (disk_bump(), DISK)):
        probes = interior_probes(p.manifold, 0.5)
        r1 = interior_residual_rms(p, 0.2, grid, probes)
        r2 = interior_residual_rms(p, 0.1, grid, probes)
        assert 1.5 <= decay_slope(r1, r2, 0.2, 0.1) <= 2.5


def test_boundary_truncation_rates():
    # disk paraboloid: nonzero flux, residual ~ delta^3
    p = disk_paraboloid()
    b1 = boundary_residual_l2(p, 0.2, DISK, 32)
    b2 = boundary_residual_l2(p, 0.1, DISK, 32)
    assert 2.0 <= decay_slope(b1, b2, 0.2, 0.1) <= 3.0
    # hemisphere u = z^2 has zero flux; the leading term drops and decay is ~ delta^4
    p = hemisphere_z2()
    h1 = boundary_residual_l2(p, 0.2, HEMI, 32)
    h2 = boundary_residual_l2(p, 0.1, HEMI, 32)
    # rotational symmetry: pointwise residual is constant, frozen from an independent midpoint rule
    q = p.manifold.boundary_chart(np.array(0.0))
    assert truncation_boundary(p, 0.2, q, HEMI) == pytest.approx(7.2528e-5, rel=1e-4)
    assert truncation_boundary(p, 0.1, q, HEMI) == pytest.approx(4.5947e-6, rel=1e-4)
    assert h1 == pytest.approx(7.2528e-5 * np.sqrt(2 * np.pi), rel=1e-4)
    assert 3.8 <= decay_slope(h1, h2, 0.2, 0.1) <= 4.2


def test_adjointness_of_flux_operators():
    w = lambda x: np.cos(x[..., 0]) + x[..., 1] ** 2
    s = lambda x: 1.0 + 0.5 * np.sin(3 * np.arctan2(x[..., 1], x[..., 0]))
    gap = adjointness_gap(QuadratureGrid(Disk(), 120), 0.2, w, s)
    assert gap["gap"] <= 1e-8 * gap["scale"]


def test_domain_and_configuration_errors():
    q = Disk().boundary_chart(np.array(0.0))
    u = lambda x: x[..., 0]
    with pytest.raises(DomainError):
        apply_operator("D", np.array([0.1, 0.1]), 0.1, DISK, u)
    with pytest.raises(DomainError):
        apply_operator("L", np.array([1.5, 0.0]), 0.1, DISK, u)
    with pytest.raises(DomainError):
        apply_operator("L", np.array([0.1, 0.0, 0.0]), 0.1, DISK, u)
    with pytest.raises(ConfigurationError):
        apply_operator("X", q, 0.1, DISK, u)
    with pytest.raises(ConfigurationError):
        apply_operator("D", q, 0.1, DISK)
    with pytest.raises(ConfigurationError):
        apply_operator("D", q, 0.1, DISK, u, kernel=KernelFamily(0.2))
    with pytest.raises(ConfigurationError):
        QuadratureGrid(Disk(), 0)


def test_vectorized_matches_pointwise():
    p = hemisphere_z2()
    xs = interior_probes(p.manifold, 0.3, 4)
    vec = truncation_interior(p, 0.15, xs, HEMI)
    single = [truncation_interior(p, 0.15, x, HEMI) for x in xs]
    np.testing.assert_allclose(vec, single, rtol=1e-13, atol=1e-15)
