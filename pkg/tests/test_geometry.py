import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmenrich.exceptions import ConfigurationError, DegenerateGeometryError, DomainError
from lmenrich.geometry import ComponentSpec, ContourScheme, consistent_normals, fit_curve

OPEN = ComponentSpec("arc", 0, 4)
CLOSED8 = ComponentSpec("loop", 0, 7, closed=True)


def circle(n, r=50.0, center=(100.0, 80.0), phase=0.0):
    a = phase + 2 * np.pi * np.arange(n) / n
    return np.c_[center[0] + r * np.cos(a), center[1] + r * np.sin(a)]


def test_two_anchor_line_midpoint():
    c = fit_curve([(0, 0), (10, 0)], ComponentSpec("l", 0, 1), "line")
    assert c.kind == "polyline"
    np.testing.assert_allclose(c(0.5), (5, 0))
    np.testing.assert_array_equal(c(0.0), (0, 0))


def test_two_anchors_fall_back_to_polyline_for_bspline():
    c = fit_curve([(0, 0), (10, 0)], ComponentSpec("l", 0, 1))
    assert c.kind == "polyline"


def test_closed_circle_fit_accuracy():
    c = fit_curve(circle(8), CLOSED8)
    u = np.linspace(0, 8, 2001)
    r = np.linalg.norm(c(u) - (100.0, 80.0), axis=1)
    assert np.max(np.abs(r - 50.0)) < 0.5


@pytest.mark.parametrize("spec,pts", [
    (OPEN, np.array([(0, 0), (3, 4), (7, 5), (9, 1), (12, -2)], float)),
    (CLOSED8, circle(8)),
])
def test_interpolates_anchors(spec, pts):
    c = fit_curve(pts, spec)
    np.testing.assert_allclose(c(c.params), pts, atol=1e-6, rtol=0)


def test_periodic_seam():
    c = fit_curve(circle(8, phase=0.3), CLOSED8)
    lo, hi = c.domain
    np.testing.assert_allclose(c(lo), c(hi), atol=1e-9)
    np.testing.assert_allclose(c.derivative(lo), c.derivative(hi - 1e-12), atol=1e-6)
    # wrapped evaluation outside the domain
    np.testing.assert_allclose(c(hi + 0.25), c(lo + 0.25), atol=1e-9)


def test_open_curve_rejects_out_of_domain():
    c = fit_curve(circle(5)[:5], OPEN)
    with pytest.raises(DomainError):
        c(4.5)


def test_horizontal_polyline_tangent():
    c = fit_curve([(0, 0), (4, 0), (10, 0)], ComponentSpec("h", 0, 2), "line")
    for u in np.linspace(0, 2, 9):
        d = c.derivative(u)
        assert d[1] == 0 and d[0] > 0


def test_polyline_vertex_tangent_averages_segments():
    c = fit_curve([(0, 0), (1, 0), (1, 1)], ComponentSpec("v", 0, 2), "line")
    d = c.derivative(1.0)
    np.testing.assert_allclose(d / np.linalg.norm(d), np.array([1, 1]) / np.sqrt(2))
    np.testing.assert_allclose(c.derivative(0.0), (1, 0))
    np.testing.assert_allclose(c.derivative(2.0), (0, 1))


def test_circle_tangent_perpendicular_to_radius():
    c = fit_curve(circle(8), CLOSED8)
    for u in c.params:
        t = c.derivative(u)
        radial = c(u) - (100.0, 80.0)
        cos = abs(t @ radial) / np.linalg.norm(t) / np.linalg.norm(radial)
        assert np.degrees(np.arcsin(min(cos, 1.0))) < 2.0


@pytest.mark.parametrize("spec,pts", [
    (OPEN, np.array([(0, 0), (3, 4), (7, 5), (9, 1), (12, -2)], float)),
    (CLOSED8, circle(8)),
])
def test_derivative_matches_finite_difference(spec, pts):
    c = fit_curve(pts, spec)
    h = 1e-5
    for u in np.linspace(0.3, c.domain[1] - 0.3, 13):
        fd = (c(u + h) - c(u - h)) / (2 * h)
        d = c.derivative(u)
        assert np.linalg.norm(fd - d) / np.linalg.norm(d) < 1e-4


def test_normal_sign_rule_example():
    c = fit_curve([(0, 0), (10, 0)], ComponentSpec("l", 0, 1), "line")
    # hint below the point (larger y) -> normal points up (-y)
    np.testing.assert_allclose(c.unit_normal(0.5, (5, 10)), (0, -1))
    np.testing.assert_allclose(c.unit_normal(0.5, (5, -10)), (0, 1))


def test_circle_normal_outward():
    c = fit_curve(circle(8), CLOSED8)
    u = np.linspace(0, 8, 50, endpoint=False)
    n = c.unit_normal(u, (100.0, 80.0))
    radial = c(u) - (100.0, 80.0)
    radial /= np.linalg.norm(radial, axis=1, keepdims=True)
    assert np.all(np.sum(n * radial, axis=1) > 0.99)


def test_normals_unit_and_orthogonal():
    c = fit_curve(np.array([(0, 0), (3, 4), (7, 5), (9, 1), (12, -2)], float), OPEN)
    u = np.linspace(0, 4, 33)
    n = consistent_normals(c, u, (6, 20))
    t = c.derivative(u)
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-9)
    assert np.all(np.abs(np.sum(n * t, axis=1)) / np.linalg.norm(t, axis=1) < 1e-6)


def test_consistent_normals_share_one_side():
    # straight line with the hint almost on it: pointwise rule could flip, the aggregate rule does not
    c = fit_curve([(0, 0), (0, 5), (0, 10), (0, 15)], ComponentSpec("n", 0, 3), "line")
    n = consistent_normals(c, np.linspace(0, 3, 13), (0.01, 7.5))
    assert np.all(n[:, 0] < 0) or np.all(n[:, 0] > 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-500, 500), st.floats(-500, 500), st.floats(0, 2 * np.pi))
def test_affine_equivariance(dx, dy, angle):
    pts = circle(8, phase=0.2) * (1.0, 0.6)
    base = fit_curve(pts, CLOSED8)
    moved = fit_curve(pts + (dx, dy), CLOSED8)
    u = np.linspace(0, 8, 17)
    np.testing.assert_allclose(moved(u), base(u) + (dx, dy), atol=1e-9 * (1 + abs(dx) + abs(dy)))
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    rotated = fit_curve(pts @ rot.T, CLOSED8)
    np.testing.assert_allclose(rotated.derivative(u), base.derivative(u) @ rot.T, atol=1e-9 * 300)
    hint = pts.mean(axis=0)
    np.testing.assert_allclose(rotated.unit_normal(u, hint @ rot.T), base.unit_normal(u, hint) @ rot.T, atol=1e-9)


def test_fit_errors():
    with pytest.raises(ConfigurationError):
        fit_curve([(1.0, 2.0)], ComponentSpec("x", 0, 1))
    with pytest.raises(DegenerateGeometryError):
        fit_curve([(1, 1)] * 5, OPEN)
    with pytest.raises(ConfigurationError):
        fit_curve([(0, 0), (1, np.nan), (2, 0), (3, 0), (4, 1)], OPEN)
    with pytest.raises(ConfigurationError):
        fit_curve([(0, 0), (1, 1), (2, 0)], ComponentSpec("c", 0, 2))  # cubic needs 4


def test_zero_tangent_raises():
    c = fit_curve([(0, 0), (0, 0), (1, 0)], ComponentSpec("z", 0, 2), "line")
    with pytest.raises(DegenerateGeometryError):
        c.derivative(0.5)


def test_scheme_rejects_overlap_and_gaps():
    with pytest.raises(ConfigurationError):
        ContourScheme("bad", [ComponentSpec("a", 0, 4), ComponentSpec("b", 4, 6)])
    with pytest.raises(ConfigurationError):
        ContourScheme("bad", [ComponentSpec("a", 0, 3), ComponentSpec("b", 5, 6)])
