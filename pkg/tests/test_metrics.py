import warnings

import numpy as np
import pytest

from lmenrich.data_io import generate_scene
from lmenrich.data_io.synthetic import oracle_edges, oracle_enriched
from lmenrich.enrichment import initialize_enriched
from lmenrich.exceptions import ConfigurationError, DegenerateAnnotationError
from lmenrich.geometry import ComponentSpec, fit_curve
from lmenrich.metrics import (
    angle_at, edges_from_enriched, evaluate, is_self_intersecting, mape, mape_table, mean_error, morphometrics,
    nme_edge, nme_point, point_to_polyline_distance, polygon_area, sample_curve,
)


def test_mean_error_examples():
    assert mean_error([(0, 0)], [(0, 0)]) == 0
    assert mean_error([(3, 4)], [(0, 0)]) == 5


def test_random_offsets_me():
    rng = np.random.default_rng(0)
    o = rng.uniform(-8, 8, 100_000)
    angle = rng.uniform(0, 2 * np.pi, o.size)
    offsets = o[:, None] * np.c_[np.cos(angle), np.sin(angle)]
    assert mean_error(offsets, np.zeros_like(offsets)) == pytest.approx(4.0, abs=0.05)


def test_nme_point_examples():
    P = np.array([(0.0, 0.0), (0.0, 0.0)])
    Q = np.array([(3.0, 4.0), (0.0, 5.0)])
    assert nme_point(Q, P, 100) == pytest.approx(0.05)
    assert nme_point(2 * Q, 2 * P, 200) == pytest.approx(nme_point(Q, P, 100))
    assert nme_point(P, P, 10) == 0
    with pytest.raises(DegenerateAnnotationError):
        nme_point(P, Q, 0)


def test_nme_edge_horizontal_edge():
    line = np.array([(0.0, 0.0), (100.0, 0.0)])
    P_hat = np.array([(10.0, 0.0)])
    assert nme_edge([(30.0, 1.0)], P_hat, [([0], line)], 50.0) == pytest.approx(1 / 50)


def test_nme_edge_zero_for_tangential_slide():
    pts = np.array([(0, 0), (10, 5), (20, 6), (30, 3), (40, -4)], float)
    curve = fit_curve(pts, ComponentSpec("c", 0, 4))
    poly = sample_curve(curve)
    slid = poly[np.linspace(0, len(poly) - 1, 5).astype(int)]
    assert nme_edge(slid, pts, [(np.arange(5), curve)], 10.0) == 0.0
    on_curve = curve(np.array([0.3, 1.7, 2.2, 3.1, 3.9]))
    assert nme_edge(on_curve, pts, [(np.arange(5), curve)], 10.0) < 1e-3 / 10


def test_nme_edge_requires_coverage():
    with pytest.raises(ConfigurationError):
        nme_edge(np.zeros((3, 2)), np.zeros((3, 2)), [([0, 1], np.array([(0, 0), (1, 0)]))], 1.0)


def test_point_to_polyline_projection():
    poly = np.array([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)])
    d = point_to_polyline_distance([(5, 3), (12, 5), (-3, -4), (10, 0)], poly)
    np.testing.assert_allclose(d, [3, 2, 5, 0])


def test_sample_curve_contains_anchors():
    pts = np.array([(0, 0), (10, 5), (20, 6), (30, 3)], float)
    poly = sample_curve(fit_curve(pts, ComponentSpec("c", 0, 3)))
    for p in pts:
        assert np.any(np.all(poly == p, axis=1))


def random_fixture(rng):
    n = int(rng.integers(4, 14))
    closed = bool(rng.random() < 0.5)
    a = np.sort(rng.uniform(0, 2 * np.pi if closed else np.pi, n))
    r = rng.uniform(10, 80, 2)
    gt = np.c_[r[0] * np.cos(a), r[1] * np.sin(a)] + rng.normal(0, 1, (n, 2))
    spec = ComponentSpec("c", 0, n - 1, closed=closed)
    curve = fit_curve(gt, spec, "line" if rng.random() < 0.2 else None)
    pred = gt + rng.normal(0, rng.uniform(0, 6), gt.shape)
    return gt, pred, curve


def test_edge_never_exceeds_point_error():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        gt, pred, curve = random_fixture(rng)
        d = rng.uniform(20, 200)
        assert nme_edge(pred, gt, [(np.arange(len(gt)), curve)], d) <= nme_point(pred, gt, d) + 1e-12


def test_evaluate_zero_report(scheme68, scene):
    gt = oracle_enriched(scene, 5)
    report = evaluate([gt], [gt], scheme68, [oracle_edges(scene, 5)])
    for row in report.rows.values():
        assert row["me"] == 0 and row["nme_point"] == 0
        assert row["nme_edge"] < 1e-6
    report = evaluate([gt], [gt], scheme68)
    assert all(r["nme_edge"] == 0 for r in report.rows.values())
    assert set(report.rows) == {c.name for c in scheme68.components} | {"whole_face"}
    assert report.rows["whole_face"]["n_points"] == 320
    assert "whole_face" in report.to_table()


def test_evaluate_init_vs_oracle(scheme68):
    scene = generate_scene(5)
    init = initialize_enriched(scene.anchors, scheme68, 5)
    report = evaluate([init], [oracle_enriched(scene, 5)], scheme68, [oracle_edges(scene, 5)])
    r = report.rows["whole_face"]
    assert 0 < r["nme_edge"] <= r["nme_point"]


def test_edges_from_enriched_isolated(scheme98):
    from conftest import wflw_like_anchors

    gt = initialize_enriched(wflw_like_anchors(), scheme98, 3)
    edges, iso = edges_from_enriched(gt, scheme98)
    assert len(edges) == 9 and iso == [len(gt) - 2, len(gt) - 1]


def test_geometry_helpers():
    assert polygon_area([(0, 0), (1, 0), (1, 1), (0, 1)]) == 1.0
    assert angle_at(np.zeros(2), (1, 0), (0, 1)) == pytest.approx(90.0)
    assert is_self_intersecting([(0, 0), (1, 1), (1, 0), (0, 1)])
    assert not is_self_intersecting([(0, 0), (1, 0), (1, 1), (0, 1)])


@pytest.mark.parametrize("pred,ref,expected", [
    ([1, 2, 3], [1, 2, 3], 0.0),
    ([1.1, 2.2, 3.3], [1, 2, 3], 10.0),
    ([1.1, 0.7], [1, 1], 20.0),
])
def test_mape_examples(pred, ref, expected):
    assert mape(pred, ref) == pytest.approx(expected)


def test_mape_zero_reference_warns():
    with pytest.warns(RuntimeWarning):
        assert mape([1, 5], [0, 4]) == pytest.approx(25.0)


def symmetric_lips(scene):
    pts = scene.anchors.copy()
    a_out = np.deg2rad(180 + 30 * np.arange(12))
    a_in = np.deg2rad(180 + 45 * np.arange(8))
    pts[48:60] = np.c_[250 + 60 * np.cos(a_out), 380 + 25 * np.sin(a_out)]
    pts[60:68] = np.c_[250 + 35 * np.cos(a_in), 380 + 8 * np.sin(a_in)]
    return pts


@pytest.mark.parametrize("density", [1, 5])
def test_morphometrics_lip_ratio_symmetric(scheme68, scene, density):
    m = morphometrics(initialize_enriched(symmetric_lips(scene), scheme68, density), scheme68)
    assert m["lip_area_ratio"].value == pytest.approx(1.0, rel=1e-9)
    assert not m["lip_area_ratio"].flagged
    assert 90 < m["chin_angle"].value < 180
    assert m["left_jaw_area"].value > 0 and m["right_jaw_area"].value > 0


def test_mape_table_identity(scheme68, scene):
    m = morphometrics(initialize_enriched(scene.anchors, scheme68, 5), scheme68)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert all(v == 0 for v in mape_table([m], [m]).values())
