"""Quadrature over the graph and the integral-level estimates.

Integrals over the submanifold are realised in the chart as
``int_Omega F(x) sqrt(det g(x)) dx`` with tensor-product Gauss-Legendre cells.
Node evaluations are split into fixed-size chunks (independent of the number
of worker threads) and every sum runs once over the concatenated node values,
so results do not depend on the parallelism degree.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from math import gamma, pi, sqrt
from typing import Optional

import numpy as np

from .errors import FlatnessError, HypothesisViolation
from .geometry import build_point_geometry
from .identities import FLAT_TOL, MARGIN_TOL, subsolution_constant, subsolution_margin

CHUNK = 256
DRIFT_TOL = 1e-4

_FIELDS_BY_DEPTH = {
    1: ("f", "g", "sqrt_g", "g_inv"),
    2: ("normA2", "normH2", "commutator_norm", "d2psi_norm"),
    3: ("normGradH2", "K1"),
    4: ("normGradA2", "h_hessH", "cubic", "quartic", "K2", "normA2_grad", "normA2_hess"),
}


def _wanted(depth):
    out = []
    for d in range(1, depth + 1):
        out.extend(_FIELDS_BY_DEPTH[d])
    return out


def evaluate_fields(graph, X, depth, jobs=1):
    """Selected geometry fields at the rows of ``X``, evaluated chunk by chunk.

    Returns a dict of arrays whose first axis matches ``X``. ``jobs`` only
    sets the thread count; chunk boundaries are fixed by :data:`CHUNK`.
    """
    X = np.asarray(X, dtype=np.float64).reshape(-1, graph.n)
    names = _wanted(depth)
    if len(X) == 0:
        pg = build_point_geometry(graph, np.zeros((1, graph.n)) + _interior_point(graph), depth)
        return {k: getattr(pg, k)[:0] for k in names}

    def work(start):
        pg = build_point_geometry(graph, X[start:start + CHUNK], depth)
        return {k: getattr(pg, k) for k in names}

    starts = range(0, len(X), CHUNK)
    if jobs > 1 and len(X) > CHUNK:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    return {k: np.concatenate([p[k] for p in parts], axis=0) for k in names}


def _interior_point(graph):
    if graph.domain is None:
        return np.zeros(graph.n)
    return np.array([(lo + hi) / 2 for lo, hi in graph.domain])


# -- test functions and grids ------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Polynomial bump ``max(0, 1 - |x - x0|^2 / rho^2)^s`` in the chart."""

    __test__ = False  # not a pytest class

    center: tuple
    radius: float
    s: int = 3

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if int(self.s) != self.s or self.s < 3:
            raise ValueError("smoothness exponent s must be an integer >= 3")

    def _t(self, x):
        d = np.asarray(x, dtype=np.float64) - np.asarray(self.center)
        return d, 1.0 - np.sum(d * d, axis=-1) / self.radius ** 2

    def value(self, x):
        _, t = self._t(x)
        return np.where(t > 0, np.maximum(t, 0.0) ** self.s, 0.0)

    def gradient(self, x):
        d, t = self._t(x)
        coef = np.where(t > 0, -2.0 * self.s * np.maximum(t, 0.0) ** (self.s - 1) / self.radius ** 2, 0.0)
        return coef[..., None] * d

    def support_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def scaled(self, lam):
        """Test function matching ``scale_graph(graph, lam)``."""
        return TestFunction(tuple(lam * c for c in self.center), lam * self.radius, self.s)


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product Gauss-Legendre rule on ``cells`` equal cells per axis of a box."""

    lo: tuple
    hi: tuple
    cells: int = 8
    order: int = 4

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in np.atleast_1d(self.lo)))
        object.__setattr__(self, "hi", tuple(float(v) for v in np.atleast_1d(self.hi)))
        if self.cells < 2:
            raise ValueError("need at least 2 cells per axis")
        if self.order < 1:
            raise ValueError("Gauss order must be positive")
        if any(not a < b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box must have lo < hi on every axis")

    @property
    def n(self):
        return len(self.lo)

    def refined(self):
        return QuadratureGrid(self.lo, self.hi, 2 * self.cells, self.order)

    def nodes_weights(self):
        t, wt = np.polynomial.legendre.leggauss(self.order)
        axes_x, axes_w = [], []
        for a, b in zip(self.lo, self.hi):
            h = (b - a) / self.cells
            left = a + h * np.arange(self.cells)
            axes_x.append((left[:, None] + 0.5 * h * (t[None, :] + 1.0)).ravel())
            axes_w.append(np.tile(0.5 * h * wt, self.cells))
        mesh = np.meshgrid(*axes_x, indexing="ij")
        wmesh = np.meshgrid(*axes_w, indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=-1)
        W = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)
        return X, W


def _box_inside(graph, lo, hi, strict=False):
    if graph.domain is None:
        return True
    for a, b, (dlo, dhi) in zip(lo, hi, graph.domain):
        if strict and not (dlo < a and b < dhi):
            return False
        if not strict and not (dlo <= a and b <= dhi):
            return False
    return True


# -- reports -----------------------------------------------------------------------


@dataclass
class IntegralResult:
    value: float
    refined: float
    drift: float
    converged: bool


@dataclass
class EstimateReport:
    name: str
    terms: dict
    left: float
    right: float
    ratio: float
    passed: Optional[bool]
    converged: bool
    drift: float
    constants: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "name": self.name, "terms": dict(self.terms), "left": self.left,
            "right": self.right, "ratio": self.ratio, "passed": self.passed,
            "converged": self.converged, "drift": self.drift,
            "constants": dict(self.constants), "rows": [dict(r) for r in self.rows],
            "detail": dict(self.detail),
        }


def _rel_drift(a, b):
    denom = max(abs(a), abs(b))
    return 0.0 if denom == 0.0 else abs(a - b) / denom


def _sums(graph, grid, depth, term_fn, mask_fn=None, jobs=1):
    X, W = grid.nodes_weights()
    if mask_fn is not None:
        keep = mask_fn(X)
        X, W = X[keep], W[keep]
    F = evaluate_fields(graph, X, depth, jobs)
    vals = term_fn(F, X)
    dA = W * F["sqrt_g"]
    return {k: float(np.sum(dA * v)) for k, v in vals.items()}, F, X


def integrate_sigma(graph, integrand, grid, jobs=1):
    """``int integrand dH^n`` over the graph of ``grid``'s box, with a refinement check.

    ``integrand`` maps a batch of chart points ``(N, n)`` to values ``(N,)``.
    """
    if not _box_inside(graph, grid.lo, grid.hi):
        raise HypothesisViolation("integration box is not contained in the chart domain")

    def term(F, X):
        return {"I": np.asarray(integrand(X), dtype=np.float64)}

    a = _sums(graph, grid, 1, term, jobs=jobs)[0]["I"]
    b = _sums(graph, grid.refined(), 1, term, jobs=jobs)[0]["I"]
    drift = _rel_drift(a, b)
    return IntegralResult(a, b, drift, drift <= DRIFT_TOL)


def _support_grid(graph, phi, cells, order):
    lo, hi = phi.support_box()
    if len(lo) != graph.n:
        raise ValueError("test function dimension does not match the graph")
    if not _box_inside(graph, lo, hi):
        raise HypothesisViolation(
            "support of the test function escapes the chart domain "
            f"(center {list(phi.center)}, radius {phi.radius:g})")
    return QuadratureGrid(tuple(lo), tuple(hi), cells, order)


def _require_flat(F):
    bound = FLAT_TOL * np.maximum(F["normA2"], 1.0)
    if np.any(F["commutator_norm"] > bound):
        raise FlatnessError(
            "normal bundle not flat on the support: commutator norm "
            f"{float(np.max(F['commutator_norm'])):.3g}")


def _grad_norm2(F, dphi):
    return np.einsum("...i,...ij,...j->...", dphi, F["g_inv"], dphi)


def _two_grid(graph, grid, depth, term_fn, mask_fn, jobs):
    coarse, F, _ = _sums(graph, grid, depth, term_fn, mask_fn, jobs)
    _require_flat(F)
    fine, F2, _ = _sums(graph, grid.refined(), depth, term_fn, mask_fn, jobs)
    _require_flat(F2)
    return coarse, fine


def check_stability(graph, phi, cells=8, order=4, tol=1e-8, jobs=1):
    """``int |A|^2 phi^2 <= int (|grad phi|^2 + K1 phi^2)`` (constant 1)."""
    grid = _support_grid(graph, phi, cells, order)

    def terms(F, X):
        v = phi.value(X)
        return {"A2_phi2": F["normA2"] * v ** 2,
                "grad_phi2": _grad_norm2(F, phi.gradient(X)),
                "K1_phi2": F["K1"] * v ** 2}

    mask = lambda X: phi.value(X) > 0  # noqa: E731
    coarse, fine = _two_grid(graph, grid, 3, terms, mask, jobs)
    left = coarse["A2_phi2"]
    right = coarse["grad_phi2"] + coarse["K1_phi2"]
    drift = max(_rel_drift(left, fine["A2_phi2"]),
                _rel_drift(right, fine["grad_phi2"] + fine["K1_phi2"]))
    ratio = left / right if right > 0 else (0.0 if left == 0 else float("inf"))
    return EstimateReport(
        "stability", coarse, left, right, ratio, left <= right * (1.0 + tol),
        drift <= DRIFT_TOL, drift, constants={"C": 1.0},
        detail={"refined_terms": fine, "center": list(phi.center), "rho": phi.radius,
                "s": phi.s, "cells": cells, "gauss": order})


def p_window(n):
    return 4.0, 4.0 + sqrt(8.0 / n)


def check_integral_estimate(graph, p, phi, cells=8, order=4, jobs=1):
    """Measured ratio of ``int |A|^p phi^p`` to the sum of the right-hand terms."""
    lo, hi = p_window(graph.n)
    if not lo <= p < hi:
        raise HypothesisViolation(
            f"exponent p={p:g} outside the admissible range: estimate holds "
            f"for all p in [4, 4+sqrt(8/n)) = [{lo:g}, {hi:.6g}) with n={graph.n}")
    grid = _support_grid(graph, phi, cells, order)

    def terms(F, X):
        v = phi.value(X) ** p
        return {"A_p": F["normA2"] ** (p / 2) * v,
                "grad_phi_p": _grad_norm2(F, phi.gradient(X)) ** (p / 2),
                "H_p": F["normH2"] ** (p / 2) * v,
                "gradH_p2": F["normGradH2"] ** (p / 4) * v,
                "K1_p2": F["K1"] ** (p / 2) * v,
                "K2_p3": F["K2"] ** (p / 3) * v}

    mask = lambda X: phi.value(X) > 0  # noqa: E731
    coarse, fine = _two_grid(graph, grid, 4, terms, mask, jobs)
    left = coarse["A_p"]
    right = sum(v for k, v in coarse.items() if k != "A_p")
    right_f = sum(v for k, v in fine.items() if k != "A_p")
    drift = max(_rel_drift(left, fine["A_p"]), _rel_drift(right, right_f))
    ratio = left / right if right > 0 else 0.0
    return EstimateReport(
        "integral_estimate", coarse, left, right, ratio, None, drift <= DRIFT_TOL, drift,
        constants={"C": 1.0, "p": p},
        detail={"refined_terms": fine, "center": list(phi.center), "rho": phi.radius,
                "s": phi.s, "cells": cells, "gauss": order})


# -- balls on the submanifold ---------------------------------------------------------


def unit_ball_volume(n):
    return pi ** (n / 2) / gamma(n / 2 + 1)


@dataclass
class AreaRatio:
    lower: float
    upper: float
    estimate: float
    radius: float

    def contains(self, value):
        return self.lower <= value <= self.upper


def default_area_depth(n):
    return 6 if n <= 2 else 3


def _cell_corners(n):
    return np.array(list(product((0.0, 1.0), repeat=n)))


def _unit_cell_rule(n, order):
    t, wt = np.polynomial.legendre.leggauss(order)
    tn = np.stack([m.ravel() for m in np.meshgrid(*([0.5 * (t + 1)] * n), indexing="ij")], -1)
    wn = np.prod(np.stack([m.ravel() for m in np.meshgrid(*([0.5 * wt] * n), indexing="ij")], -1), -1)
    return tn, wn


def _adaptive_region(graph, lo, size, depth, order, classify, member, terms, jobs,
                     field_depth=1):
    """Integrate over cells bisected where ``classify`` cannot decide membership.

    ``classify(lo, size)`` returns boolean arrays (inside, outside) for cells
    with lower corners ``lo``; ``member(X, F)`` is the pointwise indicator used
    in cells still undecided at the finest level; ``terms(X, F)`` returns a
    dict of integrands. Returns dicts of sums over inside cells, over
    undecided cells and over the member nodes of undecided cells.
    """
    n = graph.n
    tn, wn = _unit_cell_rule(n, order)
    corners = _cell_corners(n)

    def cell_sum(cells_lo, size, use_member):
        X = (cells_lo[:, None, :] + size * tn[None, :, :]).reshape(-1, n)
        F = evaluate_fields(graph, X, field_depth, jobs)
        dA = F["sqrt_g"] * np.tile(wn, len(cells_lo)) * size ** n
        if use_member:
            dA = dA * member(X, F)
        return {k: float(np.sum(dA * v)) for k, v in terms(X, F).items()}

    def add(acc, part):
        return {k: acc.get(k, 0.0) + v for k, v in part.items()}

    inside = {}
    for level in range(depth + 1):
        is_in, is_out = classify(lo, size)
        inside = add(inside, cell_sum(lo[is_in], size, False))
        rest = lo[~is_in & ~is_out]
        if level == depth or len(rest) == 0:
            break
        half = size / 2
        lo = (rest[:, None, :] + half * corners[None]).reshape(-1, n)
        size = half
    return inside, cell_sum(rest, size, False), cell_sum(rest, size, True)


def _ambient_ball(graph, p, R, jobs):
    """(classify, member) for ``|f(x) - p| <= R`` with a local Lipschitz bound of ``f``."""
    n = graph.n
    corners = _cell_corners(n)

    def classify(lo, size):
        M = len(lo)
        pts = np.concatenate([lo + 0.5 * size, (lo[:, None, :] + size * corners[None]).reshape(-1, n)])
        F = evaluate_fields(graph, pts, 1, jobs)
        lam = np.linalg.eigvalsh(F["g"])[:, -1]
        lip = 1.25 * np.sqrt(np.max(np.concatenate([lam[:M, None], lam[M:].reshape(M, -1)], 1), 1))
        dist = np.linalg.norm(F["f"][:M] - p, axis=-1)
        reach = lip * size * sqrt(n) / 2
        return dist + reach <= R, dist - reach > R

    def member(X, F):
        return np.linalg.norm(F["f"] - p, axis=-1) <= R

    return classify, member


def _box_cells(lo, hi, cells):
    lo = np.asarray(lo, dtype=np.float64)
    size = (np.asarray(hi) - lo) / cells
    if not np.allclose(size, size[0], rtol=1e-12, atol=0.0):
        raise ValueError("adaptive regions need a cubic box")
    idx = np.stack([m.ravel() for m in np.meshgrid(*([np.arange(cells)] * len(lo)), indexing="ij")], -1)
    return lo + size[0] * idx, float(size[0])


@dataclass(frozen=True)
class ChartBall:
    """Euclidean ball ``|x - center| <= radius`` in the chart."""

    center: tuple
    radius: float

    def classify(self, lo, size):
        c = np.asarray(self.center, dtype=np.float64)
        d = np.linalg.norm(lo + 0.5 * size - c, axis=-1)
        reach = size * sqrt(lo.shape[-1]) / 2
        return d + reach <= self.radius, d - reach > self.radius

    def member(self, X, F=None):
        return np.linalg.norm(X - np.asarray(self.center), axis=-1) <= self.radius


def integrate_region(graph, integrand, grid, region, depth=6, jobs=1):
    """``int_region integrand dH^n`` with boundary cells bisected ``depth`` times.

    Undecided cells at the finest level use the pointwise indicator of the
    region; the refinement check repeats the computation on ``grid.refined()``.
    """
    if not _box_inside(graph, grid.lo, grid.hi):
        raise HypothesisViolation("integration box is not contained in the chart domain")

    def once(gr):
        lo, size = _box_cells(gr.lo, gr.hi, gr.cells)
        terms = lambda X, F: {"I": np.asarray(integrand(X), dtype=np.float64)}  # noqa: E731
        inside, _, edge = _adaptive_region(graph, lo, size, depth, gr.order, region.classify,
                                           region.member, terms, jobs)
        return inside["I"] + edge["I"]

    a = once(grid)
    b = once(grid.refined())
    drift = _rel_drift(a, b)
    return IntegralResult(a, b, drift, drift <= DRIFT_TOL)


def area_ratio(graph, x0, R, cells=8, depth=None, order=3, jobs=1):
    """``H^n(Sigma cap B_R(f(x0))) / R^n`` as a bracketing interval.

    Cells of the chart box ``|x - x0|_inf <= R`` (which contains the preimage
    of the ball since the graph projection is 1-Lipschitz) are classified as
    inside, outside or straddling with a local Lipschitz bound of ``f``;
    straddling cells are bisected ``depth`` times. ``lower`` counts inside
    cells, ``upper`` adds the remaining straddling cells, ``estimate`` adds
    their nodes inside the ball.
    """
    n = graph.n
    x0 = np.asarray(x0, dtype=np.float64)
    if depth is None:
        depth = default_area_depth(n)
    if not _box_inside(graph, x0 - R, x0 + R, strict=True):
        raise HypothesisViolation(
            f"Sigma cap B_R not compactly contained in the chart (R={R:g})")
    classify, member = _ambient_ball(graph, graph.embed(x0), R, jobs)
    lo, size = _box_cells(x0 - R, x0 + R, cells)
    ones = lambda X, F: {"area": np.ones(len(X))}  # noqa: E731
    inside, edge, edge_in = _adaptive_region(graph, lo, size, depth, order, classify, member,
                                             ones, jobs)
    inside, edge, edge_in = inside["area"], edge["area"], edge_in["area"]
    Rn = R ** n
    return AreaRatio(inside / Rn, (inside + edge) / Rn, (inside + edge_in) / Rn, R)


SWEEP_COLUMNS = ("R", "sup_A2_R2", "area_ratio", "R_sup_H", "R2_sup_gradH_K1", "R3_sup_K2")
SWEEP_EXTRA = ("area_ratio_lower", "area_ratio_upper", "sup_A2_R2_polished", "points",
               "hypothesis_R", "hypothesis_4R")


def _ball_samples(graph, x0, R, grid):
    t = np.linspace(-1.0, 1.0, grid)
    mesh = np.meshgrid(*([t] * graph.n), indexing="ij")
    X = x0 + R * np.stack([m.ravel() for m in mesh], -1)
    return X


def _newton_polish(graph, x0, R, p, F, X, best):
    grad = F["normA2_grad"][best]
    hess = F["normA2_hess"][best]
    step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
    cand = X[best] + step
    if not np.all(np.abs(cand - x0) <= R) or not graph.contains(cand):
        return float(F["normA2"][best])
    if np.linalg.norm(graph.embed(cand) - p) > R:
        return float(F["normA2"][best])
    val = float(build_point_geometry(graph, cand, 2).normA2)
    return max(val, float(F["normA2"][best]))


def sup_sweep(graph, x0, radii, grid=33, area_depth=None, area_cells=8, jobs=1):
    """Rows of the scale-invariant curvature-estimate quantities over ``Sigma cap B_R``.

    Suprema are taken over a uniform chart grid of ``grid`` points per axis
    restricted to the ambient ball; ``sup_A2_R2_polished`` adds one Newton
    step on ``|A|^2`` from the best grid point.
    """
    n = graph.n
    if not 2 <= n <= 5:
        raise HypothesisViolation(f"curvature estimate is stated for 2 <= n <= 5, got n={n}")
    x0 = np.asarray(x0, dtype=np.float64)
    p = graph.embed(x0)
    rows = []
    for R in radii:
        R = float(R)
        row = dict.fromkeys(SWEEP_COLUMNS + SWEEP_EXTRA, float("nan"))
        row["R"] = R
        row["hypothesis_4R"] = bool(_box_inside(graph, x0 - 4 * R, x0 + 4 * R, strict=True))
        row["hypothesis_R"] = bool(_box_inside(graph, x0 - R, x0 + R, strict=True))
        if not row["hypothesis_R"]:
            row["points"] = 0
            rows.append(row)
            continue
        X = _ball_samples(graph, x0, R, grid)
        F1 = evaluate_fields(graph, X, 1, jobs)
        X = X[np.linalg.norm(F1["f"] - p, axis=-1) <= R]
        F = evaluate_fields(graph, X, 4, jobs)
        _require_flat(F)
        best = int(np.argmax(F["normA2"]))
        row["sup_A2_R2"] = float(F["normA2"][best]) * R ** 2
        row["sup_A2_R2_polished"] = _newton_polish(graph, x0, R, p, F, X, best) * R ** 2
        row["R_sup_H"] = R * float(np.sqrt(np.max(F["normH2"])))
        row["R2_sup_gradH_K1"] = R ** 2 * float(np.max(np.sqrt(F["normGradH2"]) + F["K1"]))
        row["R3_sup_K2"] = R ** 3 * float(np.max(F["K2"]))
        ar = area_ratio(graph, x0, R, area_cells, area_depth, jobs=jobs)
        row["area_ratio"] = ar.estimate
        row["area_ratio_lower"] = ar.lower
        row["area_ratio_upper"] = ar.upper
        row["points"] = int(len(X))
        rows.append(row)
    ok = all(r["hypothesis_4R"] for r in rows)
    return EstimateReport("sup_sweep", {}, float("nan"), float("nan"), float("nan"), None, True, 0.0,
                          rows=rows, detail={"center": x0.tolist(), "grid": grid,
                                             "all_hypotheses_4R": ok})


def mean_value_data(graph, x0, R, p_exp, cells=8, order=3, depth=3, grid=33, jobs=1):
    """Quantities of the mean-value inequality for ``u = |A|^2`` on ``Sigma cap B_2R``.

    With ``Q = C(n)|A|^2`` and ``g = -2 K2 |A|`` reports ``sup_{B_R} u``,
    ``R^{-n/2} ||u||_{L^2(B_2R)}``, ``k(R) = R^{2(1-n/p)} ||g||_{L^{p/2}(B_2R)}``
    and the measured constant ``sup u / (R^{-n/2} ||u|| + k(R))``.

    Norms integrate over the ambient ball with boundary cells bisected
    ``depth`` times; the supremum and the pointwise subsolution recheck use a
    uniform chart grid of ``grid`` points per axis.
    """
    n = graph.n
    x0 = np.asarray(x0, dtype=np.float64)
    if not p_exp > n:
        raise HypothesisViolation(f"mean-value inequality needs p > n, got p={p_exp:g}")
    if not _box_inside(graph, x0 - 2 * R, x0 + 2 * R, strict=True):
        raise HypothesisViolation(
            f"Sigma cap B_2R not compactly contained in the chart (R={R:g})")
    pt = graph.embed(x0)
    q = p_exp / 2
    cn = subsolution_constant(n)

    X = _ball_samples(graph, x0, 2 * R, grid)
    F = evaluate_fields(graph, X, 4, jobs)
    dist = np.linalg.norm(F["f"] - pt, axis=-1)
    F = {k: v[dist <= 2 * R] for k, v in F.items()}
    in1 = dist[dist <= 2 * R] <= R
    _require_flat(F)
    sup_u = float(np.max(F["normA2"][in1]))
    margin, _, _, scale = subsolution_margin(_FieldView(F, n))
    worst = float(np.min(margin / np.maximum(scale, 1e-300))) if margin.size else 0.0

    def terms(Xq, Fq):
        u = Fq["normA2"]
        gfun = 2.0 * Fq["K2"] * np.sqrt(u)
        return {"u2": u ** 2, "g_p2": gfun ** (p_exp / 2), "Q_q2": (cn * u) ** (q / 2),
                "area": np.ones(len(Xq))}

    classify, member = _ambient_ball(graph, pt, 2 * R, jobs)

    def norms(c):
        lo, size = _box_cells(x0 - 2 * R, x0 + 2 * R, c)
        inside, _, edge = _adaptive_region(graph, lo, size, depth, order, classify, member,
                                           terms, jobs, field_depth=4)
        tot = {k: inside[k] + edge[k] for k in inside}
        u_l2 = sqrt(tot["u2"])
        g_norm = tot["g_p2"] ** (2.0 / p_exp)
        q_norm = tot["Q_q2"] ** (2.0 / q)
        out = {
            "sup_u": sup_u,
            "u_L2_scaled": R ** (-n / 2) * u_l2,
            "k_R": R ** (2 * (1 - n / p_exp)) * g_norm,
            "Q_scaled": R ** (2 * (1 - n / q)) * q_norm if q > n else float("nan"),
            "R_sup_H": R * float(np.sqrt(np.max(F["normH2"]))),
            "area_ratio_2R": tot["area"] / R ** n,
        }
        denom = out["u_L2_scaled"] + out["k_R"]
        return out, (sup_u / denom if denom > 0 else 0.0)

    terms_c, ratio = norms(cells)
    terms_f, ratio_f = norms(2 * cells)
    drift = _rel_drift(ratio, ratio_f)
    return EstimateReport(
        "mean_value", terms_c, sup_u, terms_c["u_L2_scaled"] + terms_c["k_R"], ratio,
        worst >= -MARGIN_TOL, drift <= DRIFT_TOL, drift, constants={"C_n": cn, "p": p_exp, "q": q},
        detail={"refined_terms": terms_f, "refined_ratio": ratio_f,
                "sample_points_in_B2R": int(len(in1)), "subsolution_min_relative_margin": worst,
                "center": x0.tolist(), "R": R})


class _FieldView:
    """Attribute access to a dict of field arrays, as the margin helpers expect."""

    def __init__(self, fields_, n):
        self.__dict__.update(fields_)
        self.n = n
