import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmcgraph import builtins as B
from pmcgraph.errors import DomainError
from pmcgraph.geometry import (GraphMap, build_point_geometry, laplace_beltrami, scalar_field,
                               scale_graph, w_graph_formula)

ORACLE_KEYS = ("g", "sqrt_g", "w", "normA2", "normH2", "normRperp2", "normGradA2",
               "normGradH2", "R")


def test_oracle_geometry(oracles):
    for item in oracles["geometry"]:
        graph = GraphMap.from_strings(item["psi"], item["n"])
        x = np.array([float(v) for v in item["x"]])
        pg = build_point_geometry(graph, x, 4)
        for key in ORACLE_KEYS:
            want = np.asarray(item["values"][key])
            got = np.asarray(getattr(pg, key))
            scale = max(1.0, float(np.max(np.abs(want))))
            assert np.max(np.abs(got - want)) <= 1e-12 * scale, (item["name"], key)


def test_flat_plane():
    pg = build_point_geometry(B.plane(), [3.0, -7.0], 4)
    assert np.allclose(pg.g, np.eye(2))
    for key in ("h", "H", "normA2", "Rperp", "K1", "K2"):
        assert np.all(getattr(pg, key) == 0), key
    assert pg.w == 1.0


def test_sphere_apex():
    pg = build_point_geometry(B.sphere_cap(2.0), [0.0, 0.0], 4)
    assert pg.normA2 == pytest.approx(0.5, abs=1e-12)
    assert np.sqrt(pg.normH2) == pytest.approx(1.0, abs=1e-12)
    assert pg.w == pytest.approx(1.0, abs=1e-15)
    assert -pg.R_chart[0, 1, 0, 1] / np.linalg.det(pg.g) == pytest.approx(0.25, abs=1e-12)


def test_affine():
    pg = build_point_geometry(B.affine(), [0.4, 0.1], 4)
    assert pg.normA2 == 0.0
    assert pg.w == pytest.approx(3 ** -0.5, rel=1e-14)


def test_depth_marks_absent_fields():
    pg = build_point_geometry(B.scherk(), [0.1, 0.2], 2)
    assert pg.h is not None and pg.gradA is None and pg.hessH is None and pg.K2 is None
    pg1 = build_point_geometry(B.scherk(), [0.1, 0.2], 1)
    assert pg1.h is None and pg1.w is not None
    with pytest.raises(ValueError):
        build_point_geometry(B.scherk(), [0.1, 0.2], 5)


def test_structure_invariants():
    graph = B.random_polynomial_graph(5, 3, 2)
    X = np.random.default_rng(5).uniform(-0.8, 0.8, (10, 3))
    pg = build_point_geometry(graph, X, 4)
    assert np.allclose(pg.g, np.swapaxes(pg.g, -1, -2))
    assert np.all(np.linalg.eigvalsh(pg.g) > 0)
    assert np.allclose(pg.Gamma, np.swapaxes(pg.Gamma, -1, -2), atol=1e-14)
    assert np.allclose(pg.h, np.swapaxes(pg.h, -1, -2), atol=1e-14)
    assert np.allclose(pg.omega, -np.swapaxes(pg.omega, -1, -2), atol=1e-14)
    assert np.max(np.abs(np.einsum("bam,bim->bai", pg.nu, pg.T))) < 1e-12
    assert np.max(np.abs(np.einsum("bam,bcm->bac", pg.nu, pg.nu) - np.eye(2))) < 1e-12
    assert np.all((pg.w > 0) & (pg.w <= 1))
    assert np.all(pg.K1 >= 0) and np.all(pg.K2 >= 0)
    compat = (pg.dg - np.einsum("blki,blj->bkij", pg.Gamma, pg.g)
              - np.einsum("blkj,bil->bkij", pg.Gamma, pg.g))
    assert np.max(np.abs(compat)) < 1e-9


def test_metric_compatibility_with_finite_differences():
    graph = B.random_polynomial_graph(6, 2, 2)
    x = np.array([0.2, -0.3])
    pg = build_point_geometry(graph, x, 2)
    h = 1e-5
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        dg = (build_point_geometry(graph, x + e, 1).g - build_point_geometry(graph, x - e, 1).g) / (2 * h)
        resid = dg - np.einsum("li,lj->ij", pg.Gamma[:, k, :], pg.g) - np.einsum("lj,il->ij", pg.Gamma[:, k, :], pg.g)
        assert np.max(np.abs(resid)) < 1e-8


def test_k1_codim_one_rperp_vanishes():
    graph = B.random_polynomial_graph(7, 3, 1)
    pg = build_point_geometry(graph, np.zeros((4, 3)) + 0.2, 3)
    assert np.all(pg.Rperp == 0)
    assert np.all(pg.commutator_norm == 0)


def test_rank_one_family_is_flat():
    X = np.random.default_rng(8).uniform(-1, 1, (50, 2))
    pg = build_point_geometry(B.rank_one_flat(), X, 3)
    assert np.max(pg.commutator_norm) <= 1e-10
    assert np.max(np.abs(pg.Rperp_chart)) <= 1e-10


def test_frame_invariance():
    graph = B.random_polynomial_graph(9, 2, 2)
    X = np.random.default_rng(9).uniform(-0.7, 0.7, (6, 2))
    base = build_point_geometry(graph, X, 4)
    q, _ = np.linalg.qr(np.random.default_rng(10).normal(size=(4, 4)))
    rot = build_point_geometry(graph, X, 4, normal_reference=q[:, :2])
    for key in ("normA2", "normH2", "normRperp2", "normGradA2", "h_hessH", "K1", "K2",
                "normGradH2", "cubic", "quartic"):
        a, b = getattr(base, key), getattr(rot, key)
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12), key
    assert np.allclose(base.w, rot.w, rtol=0, atol=0)


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_scaling_law(lam):
    graph = B.random_polynomial_graph(11, 2, 2)
    x = np.array([0.3, -0.1])
    a = build_point_geometry(graph, x, 2)
    b = build_point_geometry(scale_graph(graph, lam), lam * x, 2)
    assert b.normA2 == pytest.approx(a.normA2 / lam ** 2, rel=1e-9)
    assert b.w == pytest.approx(a.w, rel=1e-12)


def test_scaled_sphere():
    pg = build_point_geometry(scale_graph(B.sphere_cap(2.0), 3.0), [0.0, 0.0], 2)
    assert pg.normA2 == pytest.approx(0.5 / 9, rel=1e-12)
    aff = scale_graph(B.affine(), 7.0)
    assert build_point_geometry(aff, [1.0, 2.0], 2).normA2 == 0.0


def test_w_formula_and_scalar_field():
    graph = B.random_polynomial_graph(12, 2, 2)
    X = np.random.default_rng(12).uniform(-0.9, 0.9, (20, 2))
    w = scalar_field(graph, "w")(X)
    assert np.allclose(w, w_graph_formula(graph, X), rtol=1e-10, atol=0)
    assert scalar_field(B.sphere_cap(), "normA2")(np.zeros(2)) == pytest.approx(0.5)
    assert scalar_field(B.plane(), "normA2")(np.ones(2)) == 0.0
    with pytest.raises(KeyError):
        scalar_field(graph, "nope")


def test_w_is_one_iff_flat_slope():
    pg = build_point_geometry(GraphMap.from_strings(["x1^2 + x2^2"], 2), [0.0, 0.0], 1)
    assert pg.w == 1.0
    pg = build_point_geometry(GraphMap.from_strings(["x1^2 + x2^2"], 2), [1e-3, 0.0], 1)
    assert pg.w < 1.0


def test_laplace_beltrami_examples():
    plane = B.plane()
    quad = lambda X: np.asarray(X)[..., 0] ** 2  # noqa: E731
    lin = lambda X: 3 * np.asarray(X)[..., 0] - np.asarray(X)[..., 1]  # noqa: E731
    assert laplace_beltrami(plane, quad, [0.3, 0.2]).richardson == pytest.approx(2.0, rel=1e-8)
    assert abs(laplace_beltrami(plane, lin, [0.3, 0.2]).richardson) < 1e-8


def test_laplace_beltrami_sphere_coordinate_function():
    # on a sphere of radius r the ambient coordinate x3 satisfies Delta x3 = -(n/r^2) x3
    r = 2.0
    s = B.sphere_cap(r)
    height = lambda X: np.sqrt(r ** 2 - np.sum(np.asarray(X) ** 2, axis=-1))  # noqa: E731
    x = np.array([0.3, -0.4])
    want = -2.0 / r ** 2 * height(x)
    assert laplace_beltrami(s, height, x).richardson == pytest.approx(want, rel=1e-6)


def test_boundary_margin():
    with pytest.raises(DomainError):
        laplace_beltrami(B.scherk(), scalar_field(B.scherk(), "w"), [1.4995, 0.0])


def test_domain_errors():
    with pytest.raises(DomainError):
        build_point_geometry(B.sphere_cap(), [5.0, 0.0], 2)
    g = GraphMap.from_strings(["ln(x1)"], 1)
    with pytest.raises(DomainError):
        build_point_geometry(g, [-1.0], 2)


def test_graph_json_roundtrip():
    graph = B.rank_one_flat()
    again = GraphMap.from_json(graph.to_json())
    assert again.components == graph.components
    assert again.domain == graph.domain
    assert json.loads(graph.to_json())["k"] == 2
    with pytest.raises(ValueError):
        GraphMap.from_dict({"n": 2, "k": 2, "psi": ["x1"]})


def test_batch_matches_single_points():
    graph = B.random_polynomial_graph(13, 2, 2)
    X = np.random.default_rng(13).uniform(-0.5, 0.5, (5, 2))
    batch = build_point_geometry(graph, X, 4)
    for i in range(5):
        single = build_point_geometry(graph, X[i], 4)
        assert np.allclose(batch[i].hessH, single.hessH, rtol=1e-13, atol=1e-13)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.integers(0, 10_000))
def test_random_graph_k2_bound(a, b, seed):
    graph = B.random_polynomial_graph(seed, 2, 2)
    pg = build_point_geometry(graph, [a, b], 4)
    assert pg.K2 <= np.sqrt(pg.normHessH2) * (1 + 1e-12) + 1e-14
    assert 0 < pg.w <= 1
