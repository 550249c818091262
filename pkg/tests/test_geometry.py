import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polystab.exceptions import DimensionError, FeasibilityError, GeometryError
from polystab.geometry import (
    AdmissibleClassParams,
    DomainBoundary,
    Polygon,
    VertexPerturbation,
    hausdorff_distance,
    interpolate_field,
    is_admissible,
    local_coordinates,
    normal_component,
    polygon_metric,
    sample_admissible_polygon,
)

DISK = DomainBoundary.circle()


def square(s=0.5):
    return Polygon(np.array([[-s, -s], [s, -s], [s, s], [-s, s]]))


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(3, 6))
def test_metric_axioms(seed, n):
    rng = np.random.default_rng(seed)
    params = AdmissibleClassParams(n, 0.1)
    p, q, r = (sample_admissible_polygon(params, DISK, rng) for _ in range(3))
    assert polygon_metric(p, p) == 0.0
    assert polygon_metric(p, q) == polygon_metric(q, p)
    assert polygon_metric(p, q) <= polygon_metric(p, r) + polygon_metric(r, q) + 1e-12
    assert hausdorff_distance(p, q) <= polygon_metric(p, q) + 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(0, 5))
def test_metric_ignores_labeling(seed, shift):
    p = sample_admissible_polygon(AdmissibleClassParams(5, 0.1), DISK, seed)
    assert polygon_metric(p, p.relabeled(shift)) == 0.0
    assert hausdorff_distance(p, p.relabeled(shift)) == pytest.approx(0.0, abs=1e-15)


def test_hausdorff_exact_cases():
    a = square(0.5)
    assert hausdorff_distance(a, square(0.4)) == pytest.approx(0.1 * math.sqrt(2))
    # the far point of a translated square is a vertex
    b = a.translated([0.1, 0.0])
    assert hausdorff_distance(a, b) == pytest.approx(0.1)
    assert polygon_metric(a, b) == pytest.approx(0.1)


def test_hausdorff_between_vertex_counts():
    tri = Polygon(np.array([[-0.5, -0.4], [0.5, -0.4], [0.0, 0.5]]))
    sq = square(0.4)
    d = hausdorff_distance(tri, sq)
    assert d == hausdorff_distance(sq, tri)
    assert d > 0
    with pytest.raises(DimensionError):
        polygon_metric(tri, sq)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_interpolation_is_an_isometry(seed):
    rng = np.random.default_rng(seed)
    p = sample_admissible_polygon(AdmissibleClassParams(4, 0.1), DISK, rng)
    d = rng.normal(size=(4, 2))
    field = interpolate_field(p, d)
    _, vals = field.sample(50)
    assert np.max(np.linalg.norm(vals, axis=1)) == pytest.approx(VertexPerturbation(d).norm(), rel=1e-14)
    assert field.norm() == pytest.approx(np.max(np.linalg.norm(d, axis=1)))


def test_normal_component_is_linear_per_edge():
    p = square()
    d = np.array([[0.0, -1.0], [0.0, -1.0], [0.0, 0.0], [0.0, 0.0]])
    nc = normal_component(p, interpolate_field(p, d))
    # bottom edge moves down by one: h . nu = 1 along it
    assert nc.offset[0] == pytest.approx(1.0)
    assert nc.slope[0] == pytest.approx(0.0)
    # right edge goes from -1 (start) times nu_y=0 ... component is zero
    assert nc(1, 0.5) == pytest.approx(0.0)


@pytest.mark.parametrize("verts, message", [
    ([[0, 0], [1, 0]], "at least"),
    ([[0, 0], [0, 1], [1, 0]], "counterclockwise"),
    ([[0, 0], [1, 1], [1, 0], [0, 1]], "intersect|counterclockwise"),
    ([[0, 0], [1, 0], [2, 0], [1, 1]], "pi"),
    ([[0, 0], [0, 0], [1, 0], [0, 1]], "zero-length"),
])
def test_invalid_polygons(verts, message):
    with pytest.raises(GeometryError, match=message):
        Polygon(np.array(verts, float))


def test_admissibility_items():
    params = AdmissibleClassParams(4, 0.1)
    assert is_admissible(square(0.5), params, DISK)
    big = is_admissible(square(0.68), params, DISK)
    assert not big and big.failed_items == {"iii"}
    outside = is_admissible(square(0.8), params, DISK)
    assert "iii" in outside.failed_items
    sharp = Polygon(np.array([[-0.5, 0.0], [0.5, -0.03], [0.5, 0.03]]))
    assert "ii" in is_admissible(sharp, AdmissibleClassParams(3, 0.1), DISK).failed_items
    notch = Polygon(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [0.0, -0.45], [-0.5, 0.5]]))
    assert "i" in is_admissible(notch, AdmissibleClassParams(5, 0.1), DISK).failed_items
    assert "n" in is_admissible(square(), AdmissibleClassParams(3, 0.1), DISK).failed_items


def test_sampler_is_deterministic_and_admissible():
    params = AdmissibleClassParams(5, 0.1)
    a = sample_admissible_polygon(params, DISK, 11)
    b = sample_admissible_polygon(params, DISK, 11)
    assert np.array_equal(a.vertices, b.vertices)
    assert is_admissible(a, params, DISK)
    with pytest.raises(FeasibilityError):
        sample_admissible_polygon(AdmissibleClassParams(3, 0.6), DISK, 0)


def test_angle_sum_and_corner_frame():
    p = sample_admissible_polygon(AdmissibleClassParams(5, 0.1), DISK, 3)
    assert np.sum(p.angles) == pytest.approx((p.n - 2) * math.pi)
    frame = local_coordinates(p, 2)
    r, th = frame.to_polar(frame.to_xy(0.01, 0.5 * frame.alpha))
    assert r == pytest.approx(0.01) and th == pytest.approx(0.5 * frame.alpha)
    assert p.contains(frame.to_xy(1e-3, 0.5 * frame.alpha))[0]


def test_domain_boundaries():
    ell = DomainBoundary.ellipse(1.2, 0.8)
    assert not ell.is_circle and ell.contains(np.array([[1.1, 0.0]]))[0]
    assert DISK.is_circle and DISK.inradius == pytest.approx(1.0)
    assert DISK.distance_to_polygon(square(0.5)) == pytest.approx(1.0 - math.sqrt(0.5))


def test_square_examples():
    sq = square(1.0)
    assert np.allclose(sq.angles, math.pi / 2)
    assert hausdorff_distance(sq, square(2.0)) == pytest.approx(math.sqrt(2))
    assert polygon_metric(sq, sq.translated([0.3, 0.0])) == pytest.approx(0.3)
    assert hausdorff_distance(sq, sq.translated([0.3, 0.0])) == pytest.approx(0.3)
    big = DomainBoundary.circle(3.0)
    assert is_admissible(sq, AdmissibleClassParams(4, 0.2), big)
    assert "iii" in is_admissible(sq, AdmissibleClassParams(4, 2.0), big).failed_items


def test_midpoint_interpolation():
    sq = square(1.0)
    d = np.zeros((4, 2))
    d[0] = [1.0, 0.0]
    assert np.allclose(interpolate_field(sq, d).at(0, 0.5), [0.5, 0.0])
