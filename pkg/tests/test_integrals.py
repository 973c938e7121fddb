from math import pi, sqrt

import numpy as np
import pytest

from pmcgraph import builtins as B
from pmcgraph import integrals as Q
from pmcgraph.errors import FlatnessError, HypothesisViolation
from pmcgraph.geometry import scale_graph


def ones(X):
    return np.ones(len(X))


def test_test_function():
    phi = Q.TestFunction((0.1, 0.2), 0.5, 3)
    X = np.random.default_rng(0).uniform(-1, 1, (200, 2))
    v = phi.value(X)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(v[np.linalg.norm(X - [0.1, 0.2], axis=1) >= 0.5] == 0)
    assert np.all(np.linalg.norm(phi.gradient(X), axis=1) <= 2 * 3 / 0.5 + 1e-12)
    h = 1e-6
    x = np.array([0.2, 0.1])
    fd = [(phi.value(x + h * e) - phi.value(x - h * e)) / (2 * h) for e in np.eye(2)]
    assert np.allclose(phi.gradient(x), fd, rtol=1e-6)
    with pytest.raises(ValueError):
        Q.TestFunction((0, 0), 0.5, 2)


def test_grid_weights_and_refinement():
    grid = Q.QuadratureGrid((0, -1), (2, 1), 3, 4)
    X, W = grid.nodes_weights()
    assert np.all(W > 0) and W.sum() == pytest.approx(4.0)
    assert np.all((X > [0, -1]) & (X < [2, 1]))
    assert grid.refined().cells == 6
    # exact for polynomials of degree <= 7 per axis
    assert np.sum(W * X[:, 0] ** 7 * X[:, 1] ** 6) == pytest.approx(2 ** 8 / 8 * 2 / 7)


def test_integrate_sigma_examples():
    sq = Q.QuadratureGrid((0, 0), (1, 1), 2, 3)
    assert Q.integrate_sigma(B.plane(), ones, sq).value == pytest.approx(1.0, rel=1e-14)
    r = Q.integrate_sigma(B.affine(), ones, sq)
    assert r.value == pytest.approx(sqrt(3), rel=1e-14) and r.converged


def test_sphere_cap_area_over_chart_disk():
    grid = Q.QuadratureGrid((-1, -1), (1, 1), 4, 4)
    r = Q.integrate_region(B.sphere_cap(2.0), ones, grid, Q.ChartBall((0, 0), 1.0))
    assert r.converged
    assert r.value == pytest.approx(4 * pi * (2 - sqrt(3)), rel=1e-4)


def test_stability_examples():
    phi = Q.TestFunction((0.0, 0.0), 0.5, 3)
    rep = Q.check_stability(B.affine(), phi)
    assert rep.left == 0 and rep.passed
    rep = Q.check_stability(B.scherk(), phi)
    assert rep.passed and 0 < rep.left < rep.right and rep.converged
    rep = Q.check_stability(B.sphere_cap(4.0), phi)
    assert rep.passed and rep.terms["K1_phi2"] >= 0


def test_stability_hypotheses():
    with pytest.raises(HypothesisViolation):
        Q.check_stability(B.scherk(), Q.TestFunction((1.2, 0.0), 0.5))
    with pytest.raises(FlatnessError):
        Q.check_stability(B.nonflat_quadratic(), Q.TestFunction((0.0, 0.0), 0.5))


def test_integral_estimate_window():
    phi = Q.TestFunction((0, 0), 0.6)
    for p in (3.9, 6.0, 7.0):
        with pytest.raises(HypothesisViolation, match=r"4\+sqrt\(8/n\)"):
            Q.check_integral_estimate(B.scherk(), p, phi)
    assert Q.p_window(3)[1] == pytest.approx(4 + sqrt(8 / 3))


def test_integral_estimate_examples():
    phi = Q.TestFunction((0, 0), 0.6)
    rep = Q.check_integral_estimate(B.affine(), 4.0, phi)
    assert rep.left == 0 and rep.ratio == 0
    a = Q.check_integral_estimate(B.scherk(), 4.0, phi)
    b = Q.check_integral_estimate(scale_graph(B.scherk(), 2.0), 4.0, phi.scaled(2.0))
    assert 0 < a.ratio < np.inf
    assert b.ratio == pytest.approx(a.ratio, rel=0.02)


def test_area_ratio_examples():
    ar = Q.area_ratio(B.plane(), [1.0, -2.0], 3.0)
    assert ar.contains(pi) and ar.estimate == pytest.approx(pi, rel=2e-3)
    ar = Q.area_ratio(B.affine(), [0.0, 0.0], 1.0)
    assert ar.contains(pi)
    ar = Q.area_ratio(B.sphere_cap(2.0), [0.0, 0.0], 0.5)
    assert ar.lower <= ar.estimate <= ar.upper
    assert ar.contains(pi)  # ambient ball cuts a cap of area pi R^2 from any sphere
    with pytest.raises(HypothesisViolation):
        Q.area_ratio(B.sphere_cap(2.0), [0.0, 0.0], 1.5)


def test_area_ratio_n3():
    ar = Q.area_ratio(B.plane(3), [0.0, 0.0, 0.0], 1.0, cells=4, depth=3)
    assert ar.contains(Q.unit_ball_volume(3))


def test_sup_sweep_examples():
    rep = Q.sup_sweep(B.affine(), [0, 0], [1, 2, 4, 8], area_depth=3)
    assert all(r["sup_A2_R2"] == 0 for r in rep.rows)
    rep = Q.sup_sweep(B.sphere_cap(10.0), [0, 0], [0.5, 1, 2], grid=17, area_depth=3)
    for r in rep.rows:
        assert r["sup_A2_R2"] == pytest.approx(2 / 100 * r["R"] ** 2, rel=1e-9)
        assert r["R_sup_H"] == pytest.approx(r["R"] / 5, rel=1e-9)
    assert rep.rows[-1]["hypothesis_4R"] is False
    with pytest.raises(HypothesisViolation):
        Q.sup_sweep(B.plane(1), [0], [1.0])
    with pytest.raises(FlatnessError):
        Q.sup_sweep(B.nonflat_quadratic(), [0, 0], [0.2], area_depth=2)


def test_sup_sweep_flags_uncontained_radius():
    rep = Q.sup_sweep(B.scherk(), [0, 0], [2.0], area_depth=2)
    row = rep.rows[0]
    assert row["hypothesis_R"] is False and np.isnan(row["sup_A2_R2"])


def test_mean_value_examples():
    rep = Q.mean_value_data(B.affine(), [0, 0], 0.5, 8)
    assert rep.ratio == 0 and rep.terms["sup_u"] == 0 and rep.terms["k_R"] == 0
    rep = Q.mean_value_data(B.sphere_cap(4.0), [0, 0], 0.5, 8)
    assert rep.passed and np.isfinite(rep.ratio) and rep.ratio > 0 and rep.converged
    with pytest.raises(HypothesisViolation):
        Q.mean_value_data(B.sphere_cap(4.0), [0, 0], 0.5, 2.0)
    with pytest.raises(HypothesisViolation):
        Q.mean_value_data(B.sphere_cap(2.0), [0, 0], 0.7, 8)


def test_jobs_do_not_change_results():
    X = np.random.default_rng(3).uniform(-1, 1, (700, 2))
    a = Q.evaluate_fields(B.scherk(), X, 4, jobs=1)
    b = Q.evaluate_fields(B.scherk(), X, 4, jobs=4)
    for k in a:
        assert np.array_equal(a[k], b[k]), k
