import warnings

import numpy as np
import pytest

from polystab.exceptions import DimensionError
from polystab.forward import Discretization, ForwardSystem, solve_forward
from polystab.geometry import DomainBoundary, Polygon, interpolate_field
from polystab.shape import (
    SeoWarning,
    assemble_jacobian,
    injectivity_margin,
    jump_pairing,
    shape_derivative,
    solve_shape_derivative,
    solve_shape_derivative_insulating,
    transmission_jump_data,
)

DISK = DomainBoundary.circle()
TRI = Polygon(np.array([[-0.35, -0.3], [0.4, -0.2], [0.0, 0.45]]))
H = np.array([[0.3, 0.1], [-0.2, 0.4], [0.1, -0.5]])


def rel(a, b):
    return (a - b).norm() / b.norm()


@pytest.mark.parametrize("k", [2.0, 0.5, None])
def test_directional_derivative_matches_central_difference(k):
    s = ForwardSystem(DISK, TRI, k)
    d = shape_derivative(s.solve("cos:1+sin:2"), H)
    eps = 1e-5
    plus = ForwardSystem(DISK, TRI.perturbed(eps * H), k).solve("cos:1+sin:2").trace
    minus = ForwardSystem(DISK, TRI.perturbed(-eps * H), k).solve("cos:1+sin:2").trace
    fd = (plus - minus) * (1 / (2 * eps))
    assert rel(fd, d) < 1e-6


def test_taylor_remainder_is_quadratic():
    base = ForwardSystem(DISK, TRI, 2.0).solve("cos:1")
    d = shape_derivative(base, H)
    ts = np.array([1e-3, 2e-3, 4e-3, 8e-3])
    rem = []
    for t in ts:
        moved = ForwardSystem(DISK, TRI.perturbed(t * H), 2.0).solve("cos:1").trace
        rem.append((moved - base.trace - d * t).norm())
    assert np.polyfit(np.log(ts), np.log(rem), 1)[0] == pytest.approx(2.0, abs=0.1)


def test_wrappers_and_linearity_in_h():
    a = solve_shape_derivative(DISK, TRI, 2.0, "cos:1", H)
    b = solve_shape_derivative(DISK, TRI, 2.0, "cos:1", 2 * H)
    assert rel(b, a * 2.0) < 1e-12
    c = solve_shape_derivative_insulating(DISK, TRI, "cos:1", H)
    assert np.all(np.isfinite(c.values))
    field = interpolate_field(TRI, H)
    sol = solve_forward(DISK, TRI, 2.0, "cos:1")
    assert rel(shape_derivative(sol, field), a) < 1e-14
    with pytest.raises(DimensionError):
        shape_derivative(sol, np.zeros((4, 2)))


def test_jacobian_columns_match_directional_derivatives():
    J = assemble_jacobian(DISK, TRI, 2.0, ["cos:1", "sin:1"])
    s = ForwardSystem(DISK, TRI, 2.0)
    parts = [shape_derivative(s.solve(f), H).values for f in ("cos:1", "sin:1")]
    stacked = np.concatenate(parts)
    assert np.allclose(J.unweighted() @ H.ravel(), stacked, atol=1e-12)
    assert J.matrix.shape == (2 * s.n_outer, 6)
    assert J.seo_ok is True


def test_disk_dilation():
    # C(rho) = (1 - mu rho^2) / (1 + mu rho^2) with mu = (k-1)/(k+1)
    disc = Discretization(panels_per_edge=1, grading=1.0, order=8)
    rho, mu = 0.5, 1 / 3
    poly = Polygon.regular(128, rho)
    sol = solve_forward(DISK, poly, 2.0, "cos:1", disc)
    d = shape_derivative(sol, poly.vertices / rho)
    ref = d.with_values(-4 * mu * rho / (1 + mu * rho**2) ** 2 * np.cos(d.theta))
    assert rel(d, ref) < 1e-3


def test_injectivity_margin():
    J = assemble_jacobian(DISK, TRI, 2.0, ["cos:1", "sin:1"])
    m = injectivity_margin(J)
    assert m.sigma_min > 0
    assert np.linalg.norm(J.apply(m.direction.flat())) == pytest.approx(m.sigma_min, rel=1e-8)
    dup = J.matrix.copy()
    dup[:, 1] = dup[:, 0]
    assert injectivity_margin(dup).sigma_min < 1e-12 * m.singular_values[0]
    with pytest.raises(DimensionError):
        injectivity_margin(J.matrix[:, :5])


def test_seo_failure_is_a_warning():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        J = assemble_jacobian(DISK, TRI, 2.0, ["cos:1", "cos:2"])
    assert J.seo_ok is False
    assert any(issubclass(w.category, SeoWarning) for w in rec)
    assert assemble_jacobian(DISK, TRI, "insulating", ["cos:1"]).seo_ok is None


def test_jump_pairing_matches_derivative_trace():
    s = ForwardSystem(DISK, TRI, 2.0)
    u, v = s.solve("cos:1"), s.solve("sin:1+cos:2")
    du = shape_derivative(u, H)
    g = du.with_values(v.current(du.theta))
    assert jump_pairing(u, v, H) == pytest.approx(du.inner(g), rel=1e-4)


def test_jump_pairing_on_disk():
    disc = Discretization(panels_per_edge=1, grading=1.0, order=8)
    poly = Polygon.regular(128, 0.5)
    s = ForwardSystem(DISK, poly, 2.0, disc)
    u = s.solve("cos:1")
    h = poly.vertices / 0.5
    du = shape_derivative(u, h)
    assert jump_pairing(u, u, h) == pytest.approx(du.inner(du.with_values(u.current(du.theta))), rel=2e-4)


def test_jump_data_shapes():
    sol = ForwardSystem(DISK, TRI, 2.0).solve("cos:1")
    jd = transmission_jump_data(sol, H)
    n = sol.system.n_inner
    assert jd.dirichlet.shape == jd.neumann.shape == jd.h_normal.shape == (n,)
    ins = transmission_jump_data(ForwardSystem(DISK, TRI, None).solve("cos:1"), H)
    assert ins.dirichlet is None
