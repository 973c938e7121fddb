"""Residual checks for the structure equations and curvature inequalities.

Identity checks compute both sides along independent paths and report a
relative residual; inequality checks report a margin (bound minus demand).

Constants of the two inequalities
---------------------------------
Refined Simons inequality, at a point with ``|A| > 0`` and flat normal
bundle, with ``X = sum_{i != k} (nabla_k h_aii)^2``:

* ``|grad|A||^2 <= X + sum_k (nabla_k h_akk)^2`` (diagonal frame),
* ``|nabla A|^2 - |grad|A||^2 >= 2 X`` (Codazzi),
* ``sum_k (nabla_k h_akk)^2 <= (n - 1 + eps) X + (1 + (n - 1)/eps) |nabla H|^2`` (Young).

Eliminating ``X`` gives ``|nabla A|^2 >= (1 + 2/(n+eps)) |grad|A||^2 - C(n, eps) |nabla H|^2``
with ``C(n, eps) = 2 (1 + (n - 1)/eps) / (n + eps)``.

Subsolution inequality: ``|H_a h_aij h_bjk h_bki| <= |H| |A|^3 <= sqrt(n) |A|^4``
and ``sum (h_aij h_akl)^2 <= |A|^4`` turn the flat Simons identity into
``Delta|A|^2 + 2 (1 + sqrt(n)) |A|^4 >= -2 K2 |A|``.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import sqrt
from typing import Optional

import numpy as np

from .errors import FlatnessError
from .geometry import build_point_geometry, laplace_beltrami, scalar_field

EPS = np.finfo(float).eps
TENSOR_TOL = 1e-6
FD_TOL = 1e-4
MARGIN_TOL = 1e-8
FLAT_TOL = 1e-10


@dataclass
class ResidualReport:
    name: str
    x: list
    left: float
    right: float
    abs_residual: float
    rel_residual: float
    tolerance: float
    passed: bool
    margin: Optional[float] = None
    skipped: bool = False
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "name": self.name, "x": list(self.x), "left": self.left, "right": self.right,
            "abs_residual": self.abs_residual, "rel_residual": self.rel_residual,
            "tolerance": self.tolerance, "passed": self.passed, "margin": self.margin,
            "skipped": self.skipped, "detail": dict(self.detail),
        }


def simons_constant(n, eps):
    """C(n, eps) of the refined Simons inequality."""
    return 2.0 * (1.0 + (n - 1.0) / eps) / (n + eps)


def subsolution_constant(n):
    """C(n) = 2 (1 + sqrt(n)) of the subsolution inequality."""
    return 2.0 * (1.0 + sqrt(n))


def _relative(abs_res, left, right, floor):
    denom = max(abs(left), abs(right), floor)
    if denom == 0.0:
        return 0.0 if abs_res == 0.0 else float("inf")
    return abs_res / denom


def _single(pg):
    if pg.batch_shape != ():
        raise ValueError("expected geometry at a single point")


def _require_depth(pg, depth, what):
    if pg.depth < depth:
        raise ValueError(f"{what} needs geometry of depth >= {depth}, got {pg.depth}")


def _tensor_report(name, pg, left, right, scale, tol, extra=None):
    # ``scale`` is the magnitude of the terms both sides are assembled from, so
    # cancellation down to roundoff at points where the tensors vanish is not
    # mistaken for a relative error of order one.
    diff = np.abs(left - right)
    idx = np.unravel_index(int(np.argmax(diff)), diff.shape) if diff.size else ()
    abs_res = float(diff.max()) if diff.size else 0.0
    floor = max(scale, EPS * 1e4 * max(float(np.abs(left).max(initial=0.0)),
                                       float(np.abs(right).max(initial=0.0))))
    lv = float(left[idx]) if diff.size else 0.0
    rv = float(right[idx]) if diff.size else 0.0
    rel = _relative(abs_res, float(np.abs(left).max(initial=0.0)), float(np.abs(right).max(initial=0.0)), floor)
    detail = {"index": [int(i) for i in idx], "scale": floor}
    if extra:
        detail.update(extra)
    return ResidualReport(name, np.asarray(pg.x).tolist(), lv, rv, abs_res, rel, tol, rel <= tol, detail=detail)


def check_gauss(pg, tol=TENSOR_TOL):
    """Chart-formula Riemann tensor against h_il h_jk - h_ik h_jl."""
    _single(pg)
    _require_depth(pg, 3, "check_gauss")
    scale = float(np.abs(pg.h).max()) ** 2
    n = pg.n
    sect = None
    if n >= 2:
        det12 = pg.g[0, 0] * pg.g[1, 1] - pg.g[0, 1] ** 2
        sect = float(-pg.R_chart[0, 1, 0, 1] / det12)
    return _tensor_report("gauss", pg, pg.R_chart, pg.R, scale, tol,
                          {"sectional_curvature_12": sect})


def check_codazzi(pg, tol=TENSOR_TOL):
    """Symmetry nabla_k h_aij = nabla_i h_ajk, relative to |nabla A|."""
    _single(pg)
    _require_depth(pg, 3, "check_codazzi")
    gA = pg.to_orthonormal(pg.gradA, (-1, -2, -3))
    swapped = np.einsum("alij->aijl", gA)
    diff = np.abs(gA - swapped)
    abs_res = float(diff.max(initial=0.0))
    norm = sqrt(float(pg.normGradA2))
    hmax = float(np.abs(pg.h).max())
    # terms of nabla h: d h, Gamma h and omega h
    floor = max(hmax * (float(np.abs(pg.Gamma).max()) + float(np.abs(pg.omega).max(initial=0.0))),
                EPS * 1e4 * float(np.abs(gA).max(initial=0.0)))
    denom = max(norm, floor)
    rel = 0.0 if abs_res == 0.0 else (abs_res / denom if denom > 0 else float("inf"))
    idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return ResidualReport("codazzi", np.asarray(pg.x).tolist(), float(gA[idx]), float(swapped[idx]),
                          abs_res, rel, tol, rel <= tol, detail={"normGradA": norm})


def check_ricci(pg, tol=TENSOR_TOL):
    """Connection curvature of the normal bundle against the shape-operator commutator."""
    _single(pg)
    _require_depth(pg, 3, "check_ricci")
    left = pg.to_orthonormal(pg.Rperp_chart, (-3, -4))
    right = pg.to_orthonormal(pg.Rperp, (-3, -4))
    scale = float(np.abs(pg.to_orthonormal(pg.h, (-1, -2))).max()) ** 2
    return _tensor_report("ricci", pg, left, right, scale, tol,
                          {"normRperp": sqrt(float(np.sum(left ** 2)))})


def flatness_measures(pg):
    """(|R_perp| from the connection, commutator norm) per point."""
    _require_depth(pg, 3, "flatness_measures")
    Rn = pg.to_orthonormal(pg.Rperp_chart, (-3, -4))
    nr = np.sqrt(np.sum(Rn ** 2, axis=(-1, -2, -3, -4)))
    return nr, pg.commutator_norm


def check_flatness(graph, points, tol=FLAT_TOL, normal_reference=None):
    """Sup over ``points`` of |R_perp| and of the shape-operator commutators."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, graph.n)
    pg = build_point_geometry(graph, pts, 3, normal_reference)
    nr, nc = flatness_measures(pg)
    sup_r = float(nr.max())
    sup_c = float(nc.max())
    worst = max(sup_r, sup_c)
    # flatness is an absolute test: both sups must vanish to ``tol``
    return ResidualReport(
        "flatness", [], sup_r, sup_c, worst, worst, tol, worst <= tol,
        detail={"sup_Rperp": sup_r, "sup_commutator": sup_c, "points": len(pts),
                "max_pointwise_gap": float(np.abs(nr - nc).max())})


def simons_terms(pg):
    """Tensor-side terms of the Simons identity (orthonormal contractions)."""
    return {
        "normGradA2": float(pg.normGradA2),
        "h_hessH": float(pg.h_hessH),
        "cubic": float(pg.cubic),
        "quartic": float(pg.quartic),
        "normRperp2": float(pg.normRperp2),
    }


def check_simons_identity(graph, x, h_step=1e-3, tol=FD_TOL, normal_reference=None):
    """Half the finite-difference Laplacian of |A|^2 against the tensor side."""
    x = np.asarray(x, dtype=np.float64)
    pg = build_point_geometry(graph, x, 4, normal_reference)
    lap = laplace_beltrami(graph, scalar_field(graph, "normA2"), x, h_step)
    terms = simons_terms(pg)
    left = 0.5 * float(lap.richardson)
    right = (terms["normGradA2"] + terms["h_hessH"] + terms["cubic"]
             - terms["quartic"] - terms["normRperp2"])
    scale = max(abs(v) for v in terms.values())
    abs_res = abs(left - right)
    rel = _relative(abs_res, left, right, scale)
    flat_form = right + terms["normRperp2"]
    detail = dict(terms, left_coarse=0.5 * float(lap.coarse), left_fine=0.5 * float(lap.fine),
                  h_step=h_step, flat_form_right=flat_form,
                  normRperp2_below_tol=terms["normRperp2"] <= FLAT_TOL)
    return ResidualReport("simons_identity", x.tolist(), left, right, abs_res, rel, tol,
                          rel <= tol, detail=detail)


def jacobi_terms(pg):
    """Right side of the Jacobi-type equation for w, split into its terms."""
    Rn = pg.to_orthonormal(pg.Rperp, (-3, -4))
    n, k = pg.n, pg.k
    rterm = 0.0
    for a, b in combinations(range(k), 2):
        for i, j in combinations(range(n), 2):
            rterm += float(pg.Omega_abij[a, b, i, j] * Rn[i, j, a, b])
    return {
        "normA2_w": float(pg.normA2 * pg.w),
        "Omega_gradH": float(pg.extras["jacobi_H_term"]),
        "Omega_Rperp": rterm,
    }


def check_jacobi(graph, x, h_step=1e-3, tol=FD_TOL, normal_reference=None):
    """Finite-difference Laplacian of w against -|A|^2 w + Omega.grad H - 2 Omega.R_perp."""
    x = np.asarray(x, dtype=np.float64)
    pg = build_point_geometry(graph, x, 3, normal_reference)
    lap = laplace_beltrami(graph, scalar_field(graph, "w"), x, h_step)
    terms = jacobi_terms(pg)
    left = float(lap.richardson)
    right = -terms["normA2_w"] + terms["Omega_gradH"] - 2.0 * terms["Omega_Rperp"]
    scale = max(abs(v) for v in terms.values())
    abs_res = abs(left - right)
    rel = _relative(abs_res, left, right, scale)
    detail = dict(terms, w=float(pg.w), left_coarse=float(lap.coarse),
                  left_fine=float(lap.fine), h_step=h_step)
    return ResidualReport("jacobi", x.tolist(), left, right, abs_res, rel, tol, rel <= tol,
                          detail=detail)


def _assert_flat(pg, flat_tol):
    bound = flat_tol * np.maximum(pg.normA2, 1.0)
    if np.any(pg.commutator_norm > bound):
        raise FlatnessError(
            f"normal bundle not flat: commutator norm {float(np.max(pg.commutator_norm)):.3g}")


def simons_inequality_margin(pg, eps):
    """Vectorised margin of the refined Simons inequality (NaN where |A| = 0)."""
    n = pg.n
    half_lap = pg.normGradA2 + pg.h_hessH + pg.cubic - pg.quartic
    c = simons_constant(n, eps)
    bound = ((1.0 + 2.0 / (n + eps)) * pg.normGradAbs2 + pg.h_hessH + pg.cubic
             - pg.normA2 ** 2 - c * pg.normGradH2)
    margin = half_lap - bound
    scale = np.max(np.abs(np.stack([
        pg.normGradA2, pg.h_hessH, pg.cubic, pg.quartic, pg.normGradAbs2,
        pg.normA2 ** 2, c * pg.normGradH2])), axis=0)
    margin = np.where(pg.a_is_zero(), np.nan, margin)
    return margin, half_lap, bound, scale


def check_simons_inequality(pg, eps, tol=MARGIN_TOL, flat_tol=FLAT_TOL):
    """Margin of the refined Simons inequality at one point; skipped where |A| = 0."""
    _single(pg)
    _require_depth(pg, 4, "check_simons_inequality")
    if not eps > 0:
        raise ValueError("eps must be positive")
    _assert_flat(pg, flat_tol)
    margin, lhs, rhs, scale = simons_inequality_margin(pg, eps)
    x = np.asarray(pg.x).tolist()
    detail = {"eps": eps, "C": simons_constant(pg.n, eps), "scale": float(scale)}
    if np.isnan(margin):
        return ResidualReport("simons_inequality", x, float(lhs), float(rhs), 0.0, 0.0, tol,
                              True, margin=None, skipped=True, detail=detail)
    m = float(margin)
    return ResidualReport("simons_inequality", x, float(lhs), float(rhs), max(-m, 0.0),
                          max(-m, 0.0) / max(float(scale), 1e-300), tol,
                          m >= -tol * float(scale), margin=m, detail=detail)


def subsolution_margin(pg):
    n = pg.n
    lap = 2.0 * (pg.normGradA2 + pg.h_hessH + pg.cubic - pg.quartic)
    absA = np.sqrt(pg.normA2)
    c = subsolution_constant(n)
    lhs = lap + c * pg.normA2 ** 2
    rhs = -2.0 * pg.K2 * absA
    scale = np.max(np.abs(np.stack([2 * pg.normGradA2, 2 * pg.h_hessH, 2 * pg.cubic,
                                    2 * pg.quartic, c * pg.normA2 ** 2, rhs])), axis=0)
    return lhs - rhs, lhs, rhs, scale


def check_subsolution(pg, tol=MARGIN_TOL, flat_tol=FLAT_TOL):
    """Margin of Delta|A|^2 + C(n)|A|^4 >= -2 K2 |A| at one point."""
    _single(pg)
    _require_depth(pg, 4, "check_subsolution")
    _assert_flat(pg, flat_tol)
    margin, lhs, rhs, scale = subsolution_margin(pg)
    m = float(margin)
    return ResidualReport("subsolution", np.asarray(pg.x).tolist(), float(lhs), float(rhs),
                          max(-m, 0.0), max(-m, 0.0) / max(float(scale), 1e-300), tol,
                          m >= -tol * float(scale), margin=m,
                          detail={"C": subsolution_constant(pg.n), "scale": float(scale)})
