"""Pointwise geometry of a graph ``x -> (x, psi(x))`` in R^(n+k).

Every field of :class:`PointGeometry` is computed from Taylor jets of the
components of ``psi``: the tangent frame, metric, inverse metric, normal
frame and the connection forms are all carried as jets, so their derivatives
come out exactly (no finite differences) and covariant derivatives of the
second fundamental form and of the mean curvature are assembled from them.

Index conventions (coordinate frame ``T_i = df/dx^i`` unless noted):

* ``Gamma[..., l, i, j]``      Christoffel symbol Gamma^l_ij
* ``h[..., a, i, j]``          <d_i d_j f, nu_a>
* ``omega[..., i, a, b]``      <d_i nu_a, nu_b>, antisymmetric in (a, b)
* ``gradA[..., a, l, i, j]``   nabla_l h_aij
* ``gradH[..., a, i]``         nabla_i H_a
* ``hessH[..., a, i, j]``      nabla_i nabla_j H_a
* ``R[..., i, j, k, l]``       g(R(T_i, T_j) T_k, T_l), R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]
* ``Rperp[..., i, j, a, b]``   <R(T_i, T_j) nu_a, nu_b>

Normal-bundle indices run over an orthonormal frame. Norms contract
tangent indices with the inverse metric. Fields that the requested depth
cannot supply are ``None``.
"""

import json
from dataclasses import dataclass, field, fields
from itertools import combinations
from typing import Optional

import numpy as np

from . import expr as _expr
from .errors import DomainError, GeometryError
from .jets import Jet, jeinsum, stack

# Sign of the normal-connection term in covariant derivatives of normal-valued
# tensors: nabla_l T_a = d_l T_a + OMEGA_SIGN * omega_{l b a} T_b. Pinned by the
# Codazzi residual test on graphs with non-flat normal bundle.
OMEGA_SIGN = 1.0

# |A| is treated as zero below this multiple of |D^2 psi|.
A_ZERO_REL = 1e-10


@dataclass(frozen=True)
class GraphMap:
    """Graph of ``psi = (psi^1, ..., psi^k)`` over a chart in R^n."""

    n: int
    k: int
    components: tuple
    domain: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("need n >= 1 and k >= 1")
        if len(self.components) != self.k:
            raise ValueError(f"expected {self.k} components, got {len(self.components)}")
        for c in self.components:
            if _expr.max_variable(c) > self.n:
                raise ValueError(f"component uses x{_expr.max_variable(c)} beyond n={self.n}")
        if self.domain is not None:
            dom = tuple((float(lo), float(hi)) for lo, hi in self.domain)
            if len(dom) != self.n or any(not lo < hi for lo, hi in dom):
                raise ValueError(f"domain must be {self.n} intervals with lo < hi")
            object.__setattr__(self, "domain", dom)

    @property
    def m(self):
        return self.n + self.k

    @classmethod
    def from_strings(cls, psi, n, domain=None, name=""):
        return cls(n, len(psi), tuple(_expr.parse(s, n) for s in psi), domain, name)

    @classmethod
    def from_dict(cls, data):
        n = int(data["n"])
        k = int(data["k"])
        psi = list(data["psi"])
        if len(psi) != k:
            raise ValueError(f"'k' is {k} but 'psi' has {len(psi)} entries")
        return cls.from_strings(psi, n, data.get("domain"), data.get("name", ""))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        out = {"n": self.n, "k": self.k, "psi": [_expr.pretty(c) for c in self.components]}
        if self.domain is not None:
            out["domain"] = [list(iv) for iv in self.domain]
        return out

    def to_json(self):
        return json.dumps(self.to_dict())

    def contains(self, x, margin=0.0):
        """True where ``x`` lies in the domain box shrunk by ``margin``."""
        x = np.asarray(x, dtype=np.float64)
        if self.domain is None:
            return np.ones(x.shape[:-1], dtype=bool)
        lo = np.array([iv[0] for iv in self.domain]) + margin
        hi = np.array([iv[1] for iv in self.domain]) - margin
        return np.all((x >= lo) & (x <= hi), axis=-1)

    def embed(self, x):
        """Ambient points f(x) = (x, psi(x))."""
        x = np.asarray(x, dtype=np.float64)
        vals = [_expr.evaluate(c, x) for c in self.components]
        return np.concatenate([x, np.stack(vals, axis=-1)], axis=-1)


def scale_graph(graph, lam):
    """Graph of ``lam * psi(x / lam)``, whose image is ``lam`` times the original."""
    lam = float(lam)
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    comps = tuple(_expr.substitute_scaled(c, lam) for c in graph.components)
    dom = None if graph.domain is None else tuple((lo * lam, hi * lam) for lo, hi in graph.domain)
    return GraphMap(graph.n, graph.k, comps, dom, graph.name)


@dataclass
class PointGeometry:
    """Pointwise tensors of a graph; leading axes of every array are batch axes."""

    x: np.ndarray
    depth: int
    f: np.ndarray
    T: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    sqrt_g: np.ndarray
    nu: np.ndarray
    frame: np.ndarray            # C with e_i = sum_j T_j C[j, i] (orthonormal tangent frame)
    w: np.ndarray
    Omega_ai: np.ndarray
    Omega_abij: np.ndarray
    d2psi_norm: np.ndarray
    Gamma: Optional[np.ndarray] = None
    dg: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    H: Optional[np.ndarray] = None
    normA2: Optional[np.ndarray] = None
    normH2: Optional[np.ndarray] = None
    R: Optional[np.ndarray] = None
    Rperp: Optional[np.ndarray] = None
    normRperp2: Optional[np.ndarray] = None
    commutator_norm: Optional[np.ndarray] = None
    gradA: Optional[np.ndarray] = None
    gradH: Optional[np.ndarray] = None
    normGradA2: Optional[np.ndarray] = None
    normGradH2: Optional[np.ndarray] = None
    normGradAbs2: Optional[np.ndarray] = None   # |grad |A||^2
    normA2_grad: Optional[np.ndarray] = None
    R_chart: Optional[np.ndarray] = None
    Rperp_chart: Optional[np.ndarray] = None
    K1: Optional[np.ndarray] = None
    hessH: Optional[np.ndarray] = None
    h_hessH: Optional[np.ndarray] = None
    normHessH2: Optional[np.ndarray] = None
    normA2_hess: Optional[np.ndarray] = None
    K2: Optional[np.ndarray] = None
    cubic: Optional[np.ndarray] = None        # H_a h_aij h_bjk h_bki
    quartic: Optional[np.ndarray] = None      # sum_ijkl (h_aij h_akl)^2
    extras: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.g.shape[-1]

    @property
    def k(self):
        return self.nu.shape[-2]

    @property
    def batch_shape(self):
        return self.w.shape

    def a_is_zero(self):
        return self.normA2 <= (A_ZERO_REL ** 2) * self.d2psi_norm ** 2

    def to_orthonormal(self, tensor, slots):
        """Rewrite the tangent slots (axis positions, negative) in the orthonormal frame."""
        out = tensor
        for ax in slots:
            out = np.moveaxis(out, ax, -1)
            out = np.einsum("...j,...ji->...i", out, _expand_frame(self.frame, out.ndim))
            out = np.moveaxis(out, -1, ax)
        return out

    def __getitem__(self, idx):
        """Select batch entries (same indexing applied to every field)."""
        kw = {}
        for f_ in fields(self):
            val = getattr(self, f_.name)
            if f_.name == "depth":
                kw["depth"] = val
            elif f_.name == "extras":
                kw["extras"] = {k: v[idx] for k, v in val.items()}
            elif f_.name == "x":
                kw["x"] = val[idx]
            elif val is None:
                kw[f_.name] = None
            else:
                kw[f_.name] = val[idx]
        return PointGeometry(**kw)

    def as_dict(self):
        out = {}
        for f_ in fields(self):
            val = getattr(self, f_.name)
            if f_.name == "extras" or val is None:
                continue
            out[f_.name] = val.tolist() if isinstance(val, np.ndarray) else val
        return out


def _expand_frame(frame, ndim):
    # frame has batch + (n, n); insert axes so it broadcasts against a tensor of ndim dims
    shape = frame.shape[:-2] + (1,) * (ndim - frame.ndim + 1) + frame.shape[-2:]
    return frame.reshape(shape)


def _det_replace(W, cols_idx, vecs):
    M = W.copy()
    for c, v in zip(cols_idx, vecs):
        M[..., :, c] = v
    return np.linalg.det(M)


def _psi_jets(graph, X, order):
    comps = [_expr.eval_jet(c, X, order) for c in graph.components]
    return stack(comps, axis=1)


def _inverse_jet(g):
    """Inverse of a symmetric positive definite matrix of jets (B, n, n)."""
    G0 = g.value
    try:
        G0inv = np.linalg.inv(G0)
    except np.linalg.LinAlgError as err:
        raise GeometryError("singular induced metric") from err
    nil = g.coeffs.copy()
    nil[..., 0] = 0.0
    M = Jet(-np.einsum("bij,bjkc->bikc", G0inv, nil), g.n, g.order)
    term = Jet.constant(G0inv, g.n, g.order)
    total = term
    for _ in range(g.order):
        term = jeinsum("bij,bjk->bik", M, term)
        total = total + term
    return total


def build_point_geometry(graph, x, depth=4, normal_reference=None):
    """Evaluate the geometry of ``graph`` at chart point(s) ``x``.

    Parameters
    ----------
    graph : GraphMap
    x : array_like, shape (..., n)
        Chart point or batch of points.
    depth : int
        Derivative budget. 1 gives frames, metric and ``w``; 2 adds the
        Christoffel symbols, second fundamental form, normal connection and
        curvatures; 3 adds ``gradA``, ``gradH``, ``K1`` and the independent
        chart-formula curvatures; 4 adds ``hessH`` and ``K2``.
    normal_reference : array_like, shape (m, k), optional
        Vectors projected onto the normal space and orthonormalised in order
        to build the normal frame. Defaults to the last ``k`` standard basis
        vectors of R^m.

    Returns
    -------
    PointGeometry
    """
    if depth not in (1, 2, 3, 4):
        raise ValueError("depth must be 1, 2, 3 or 4")
    x = np.asarray(x, dtype=np.float64)
    n, k, m = graph.n, graph.k, graph.m
    if x.shape[-1] != n:
        raise ValueError(f"point has {x.shape[-1]} coordinates, graph has n={n}")
    bshape = x.shape[:-1]
    X = x.reshape(-1, n)
    B = X.shape[0]
    if not np.all(graph.contains(X)):
        bad = X[~graph.contains(X)][0]
        raise DomainError(f"domain error: point {bad.tolist()} outside the chart domain")

    D = depth
    psi = _psi_jets(graph, X, D)                          # (B, k) order D
    dpsi = stack([psi.deriv(i) for i in range(n)], axis=1)  # (B, n, k) order D-1
    eye_n = np.broadcast_to(np.eye(n), (B, n, n))
    g = jeinsum("bia,bja->bij", dpsi, dpsi) + eye_n
    g_inv = _inverse_jet(g)

    # tangent frame T[b, i, :] = (e_i, d_i psi)
    Tc = np.zeros((B, n, m, dpsi.coeffs.shape[-1]))
    Tc[:, np.arange(n), np.arange(n), 0] = 1.0
    Tc[:, :, n:, :] = dpsi.coeffs
    T = Jet(Tc, n, D - 1)

    # normal frame: project reference vectors, Gram-Schmidt in order
    if normal_reference is None:
        ref = np.zeros((m, k))
        ref[n:, :] = np.eye(k)
    else:
        ref = np.asarray(normal_reference, dtype=np.float64)
        if ref.shape != (m, k):
            raise ValueError(f"normal_reference must have shape {(m, k)}")
    Tref = Jet(np.einsum("biac,ap->bipc", T.coeffs, ref), n, D - 1)   # (B, n, k)
    coef = jeinsum("bij,bjp->bip", g_inv, Tref)
    proj = jeinsum("bia,bip->bpa", T, coef)                           # (B, k, m)
    v = (-proj) + np.broadcast_to(ref.T, (B, k, m))
    nus = []
    for a in range(k):
        u = v[:, a]
        for nb in nus:
            u = u - (jeinsum("bc,bc->b", u, nb)).expand(-1) * nb
        nrm2 = jeinsum("bc,bc->b", u, u)
        ref_scale = float(np.dot(ref[:, a], ref[:, a]))
        if np.any(nrm2.value <= 1e-24 * max(ref_scale, 1e-300)):
            raise GeometryError("Gram-Schmidt breakdown: normal projections are rank deficient")
        nus.append(u * (nrm2 ** -0.5).expand(-1))
    nu = stack(nus, axis=1)                                           # (B, k, m) order D-1

    gv = g.value
    try:
        U = np.swapaxes(np.linalg.cholesky(gv), -1, -2)
    except np.linalg.LinAlgError as err:
        raise GeometryError("induced metric is not positive definite") from err
    Cf = np.linalg.inv(U)
    Tv = T.value
    E = np.einsum("bja,bji->bai", Tv, Cf)                             # columns e_i
    W = E[:, :n, :]
    nuv = nu.value
    w = np.linalg.det(W)
    Om_ai = np.empty((B, k, n))
    for a in range(k):
        for i in range(n):
            Om_ai[:, a, i] = _det_replace(W, [i], [nuv[:, a, :n]])
    pairs_ab = list(combinations(range(k), 2))
    pairs_ij = list(combinations(range(n), 2))
    Om_abij = np.zeros((B, k, k, n, n))
    for a, b in pairs_ab:
        for i, j in pairs_ij:
            val = _det_replace(W, [i, j], [nuv[:, a, :n], nuv[:, b, :n]])
            Om_abij[:, a, b, i, j] = val

    out = dict(
        x=x, depth=D, f=np.concatenate([X, psi.value], axis=-1), T=Tv, g=gv,
        g_inv=g_inv.value, sqrt_g=np.sqrt(np.linalg.det(gv)), nu=nuv, frame=Cf, w=w,
        Omega_ai=Om_ai, Omega_abij=Om_abij, d2psi_norm=np.zeros(B),
    )

    if D >= 2:
        _second_order(out, graph, psi, g, g_inv, nu, D)
    if D >= 3:
        _third_order(out, D)
    if D >= 4:
        _fourth_order(out)
    out.pop("_jets", None)
    pg = PointGeometry(**out)
    return _reshape_batch(pg, bshape)


def _reshape_batch(pg, bshape):
    for f_ in fields(pg):
        name = f_.name
        if name in ("depth", "extras", "x"):
            continue
        val = getattr(pg, name)
        if val is not None:
            setattr(pg, name, val.reshape(bshape + val.shape[1:]))
    pg.extras = {key: val.reshape(bshape + val.shape[1:]) for key, val in pg.extras.items()}
    return pg


def _second_order(out, graph, psi, g, g_inv, nu, D):
    n, k = graph.n, graph.k
    o2 = D - 2
    dg = stack([g.deriv(l) for l in range(n)], axis=1)               # (B, l, i, j): d_l g_ij
    dgc = dg.coeffs
    first = 0.5 * (np.einsum("bijlc->blijc", dgc) + np.einsum("bjilc->blijc", dgc) - dgc)
    Gam1 = Jet(first, g.n, o2)                                        # Gamma_{l ij}
    ginv2 = g_inv.truncate(o2)
    Gam = jeinsum("bkl,blij->bkij", ginv2, Gam1)                      # Gamma^k_ij

    d2psi = stack([stack([psi.deriv(i).deriv(j) for j in range(n)], axis=1) for i in range(n)],
                  axis=1)                                             # (B, i, j, k)
    nu2 = nu.truncate(o2)
    nu_psi = nu2[:, :, n:]
    h = jeinsum("bijp,bap->baij", d2psi, nu_psi)
    dnu = stack([nu.deriv(i) for i in range(n)], axis=1)              # (B, i, a, m)
    omega = jeinsum("biac,bdc->biad", dnu, nu2)
    H = jeinsum("bij,baij->ba", ginv2, h)

    hv, gi, Cf = h.value, out["g_inv"], out["frame"]
    hn = np.einsum("baij,bip,bjq->bapq", hv, Cf, Cf)                  # orthonormal frame
    Hv = H.value
    normA2 = np.einsum("baij,baij->b", hn, hn)
    normH2 = np.einsum("ba,ba->b", Hv, Hv)
    R = np.einsum("bail,bajk->bijkl", hv, hv) - np.einsum("baik,bajl->bijkl", hv, hv)
    Rperp = (np.einsum("bkl,bdik,bajl->bijad", gi, hv, hv)
             - np.einsum("bkl,baik,bdjl->bijad", gi, hv, hv))
    Rperp_n = np.einsum("bijad,bip,bjq->bpqad", Rperp, Cf, Cf)
    normRperp2 = np.einsum("bpqad,bpqad->b", Rperp_n, Rperp_n)
    comm = np.einsum("bapq,bdqr->badpr", hn, hn)
    comm = comm - np.swapaxes(comm, 1, 2)
    commutator_norm = np.sqrt(np.einsum("badpr,badpr->b", comm, comm))
    S2 = np.einsum("bdpq,bdqr->bpr", hn, hn)                          # sum_b h_b h_b
    cubic = np.einsum("ba,bapq,bqp->b", Hv, hn, S2)
    gram = np.einsum("bapq,bdpq->bad", hn, hn)
    quartic = np.einsum("bad,bad->b", gram, gram)
    d2v = d2psi.value
    out.update(
        Gamma=Gam.value, dg=dg.value, h=hv, omega=omega.value, H=Hv, normA2=normA2,
        normH2=normH2, R=R, Rperp=Rperp, normRperp2=normRperp2,
        commutator_norm=commutator_norm, cubic=cubic, quartic=quartic,
        d2psi_norm=np.sqrt(np.einsum("bijp,bijp->b", d2v, d2v)),
    )
    out["_jets"] = dict(Gam=Gam, h=h, omega=omega, H=H, ginv=ginv2, g=g)


def _third_order(out, D):
    J = out["_jets"]
    Gam, h, omega, H, ginv = J["Gam"], J["h"], J["omega"], J["H"], J["ginv"]
    n = Gam.n
    o3 = D - 3
    hv, Gv, wv = h.value, Gam.value, omega.value
    dh = np.stack([h.deriv(l).value for l in range(n)], axis=1)       # (B, l, a, i, j)
    gradA = (np.einsum("blaij->balij", dh)
             - np.einsum("bpli,bapj->balij", Gv, hv)
             - np.einsum("bplj,baip->balij", Gv, hv)
             + OMEGA_SIGN * np.einsum("blda,bdij->balij", wv, hv))

    om3 = omega.truncate(o3)
    H3 = H.truncate(o3)
    dH = stack([H.deriv(i) for i in range(n)], axis=2)                 # (B, a, i)
    gradH_jet = dH + OMEGA_SIGN * jeinsum("bida,bd->bai", om3, H3)
    gradH = gradH_jet.value

    Cf = out["frame"]
    gAn = np.einsum("balij,blp,biq,bjr->bapqr", gradA, Cf, Cf, Cf)
    normGradA2 = np.einsum("bapqr,bapqr->b", gAn, gAn)
    gHn = np.einsum("bai,bip->bap", gradH, Cf)
    normGradH2 = np.einsum("bap,bap->b", gHn, gHn)
    hn = np.einsum("baij,bip,bjq->bapq", hv, Cf, Cf)
    grad_normA2 = 2.0 * np.einsum("bapqr,baqr->bp", gAn, hn)          # orthonormal components
    normA2 = out["normA2"]
    zero = normA2 <= (A_ZERO_REL ** 2) * out["d2psi_norm"] ** 2
    safe = np.where(zero, 1.0, normA2)
    normGradAbs2 = np.where(zero, 0.0, np.einsum("bp,bp->b", grad_normA2, grad_normA2) / (4.0 * safe))

    # |A|^2 as a jet for exact chart derivatives
    S = jeinsum("bik,bakj->baij", ginv, h)
    A2 = jeinsum("baij,baji->b", S, S)
    normA2_grad = A2.gradient()

    # independent chart-formula curvatures
    dG = np.stack([Gam.deriv(l).value for l in range(n)], axis=1)     # (B, l, q, i, j): d_l Gamma^q_ij
    Rup = (np.einsum("biqjk->bqijk", dG) - np.einsum("bjqik->bqijk", dG)
           + np.einsum("bqip,bpjk->bqijk", Gv, Gv) - np.einsum("bqjp,bpik->bqijk", Gv, Gv))
    R_chart = np.einsum("blq,bqijk->bijkl", out["g"], Rup)
    dw = np.stack([omega.deriv(l).value for l in range(n)], axis=1)   # (B, l, i, a, d)
    Rperp_chart = (np.einsum("bijad->bijad", dw) - np.einsum("bjiad->bijad", dw)
                   + np.einsum("bjae,bied->bijad", wv, wv) - np.einsum("biae,bjed->bijad", wv, wv))

    # K1 = (w^-1 Omega_ai nabla_i H_a)^+ in the orthonormal frame
    w = out["w"]
    jac_H = np.einsum("bai,bai->b", out["Omega_ai"], gHn)
    K1 = np.maximum(jac_H / w, 0.0)

    out.update(gradA=gradA, gradH=gradH, normGradA2=normGradA2, normGradH2=normGradH2,
               normGradAbs2=normGradAbs2, normA2_grad=normA2_grad, R_chart=R_chart,
               Rperp_chart=Rperp_chart, K1=K1)
    out.setdefault("extras", {})
    out["extras"]["jacobi_H_term"] = jac_H
    J.update(gradH=gradH_jet, A2=A2)


def _fourth_order(out):
    J = out["_jets"]
    gradH_jet, Gam, omega = J["gradH"], J["Gam"], J["omega"]
    n = Gam.n
    Gv, wv = Gam.value, omega.value
    gradH = gradH_jet.value
    d_gradH = np.stack([gradH_jet.deriv(i).value for i in range(n)], axis=2)   # (B, a, i, j): d_i nabla_j H_a
    hessH = (d_gradH
             - np.einsum("blij,bal->baij", Gv, gradH)
             + OMEGA_SIGN * np.einsum("bida,bdj->baij", wv, gradH))
    Cf = out["frame"]
    hHn = np.einsum("baij,bip,bjq->bapq", hessH, Cf, Cf)
    hn = np.einsum("baij,bip,bjq->bapq", out["h"], Cf, Cf)
    h_hessH = np.einsum("bapq,bapq->b", hn, hHn)
    normHessH2 = np.einsum("bapq,bapq->b", hHn, hHn)
    normA2 = out["normA2"]
    zero = normA2 <= (A_ZERO_REL ** 2) * out["d2psi_norm"] ** 2
    absA = np.sqrt(np.where(zero, 1.0, normA2))
    K2 = np.where(zero, 0.0, np.maximum(-h_hessH / absA, 0.0))
    out.update(hessH=hessH, h_hessH=h_hessH, normHessH2=normHessH2,
               normA2_hess=J["A2"].hessian(), K2=K2)


# -- scalar fields --------------------------------------------------------------

_FIELD_DEPTH = {
    "normA2": 2, "w": 1, "sqrt_g": 1, "normH": 2, "normH2": 2, "normRperp2": 2,
    "K1": 3, "K2": 4, "normGradH": 3, "normHessH": 4,
}


def scalar_field(graph, name, normal_reference=None):
    """A batched function ``x -> value`` for a frame-invariant scalar.

    Valid names: ``normA2``, ``w``, ``sqrt_g``, ``normH``, ``normH2``,
    ``normRperp2``, ``K1``, ``K2``, ``normGradH``, ``normHessH`` and
    ``H<a>`` for the a-th mean curvature component (frame dependent).
    """
    comp = None
    if name.startswith("H") and name[1:].isdigit():
        comp = int(name[1:]) - 1
        if not 0 <= comp < graph.k:
            raise KeyError(f"unknown field {name!r}")
        depth = 2
    elif name in _FIELD_DEPTH:
        depth = _FIELD_DEPTH[name]
    else:
        raise KeyError(f"unknown field {name!r}")

    def fn(x):
        pg = build_point_geometry(graph, x, depth, normal_reference)
        if comp is not None:
            return pg.H[..., comp]
        if name == "normH":
            return np.sqrt(pg.normH2)
        if name == "normGradH":
            return np.sqrt(pg.normGradH2)
        if name == "normHessH":
            return np.sqrt(pg.normHessH2)
        return getattr(pg, name)

    fn.field_name = name
    fn.depth = depth
    return fn


def w_graph_formula(graph, x):
    """``[det(I + Dpsi^T Dpsi)]^(-1/2)`` straight from the first derivatives."""
    x = np.asarray(x, dtype=np.float64)
    jets_ = [_expr.eval_jet(c, x, 1) for c in graph.components]
    D = np.stack([j.gradient() for j in jets_], axis=-2)              # (..., k, n)
    M = np.eye(graph.n) + np.einsum("...ai,...aj->...ij", D, D)
    return np.linalg.det(M) ** -0.5


@dataclass
class LaplaceResult:
    coarse: np.ndarray
    fine: np.ndarray
    richardson: np.ndarray
    h_step: float

    @property
    def value(self):
        return self.richardson


def _laplace_once(graph, field_fn, x, h):
    n = graph.n
    x = np.asarray(x, dtype=np.float64)
    eye = np.eye(n)
    signs = np.array([1.0, -1.0])
    # y[i, s] = x + s h e_i; z[i, s, j, t] = y[i, s] + t h e_j
    y = x[None, None, :] + h * signs[None, :, None] * eye[:, None, :]
    z = y[:, :, None, None, :] + h * signs[None, None, None, :, None] * eye[None, None, :, None, :]
    phi = field_fn(z.reshape(-1, n)).reshape(n, 2, n, 2)
    grad_y = (phi[..., 0] - phi[..., 1]) / (2.0 * h)                  # (i, s, j)
    pts = np.concatenate([x[None, :], y.reshape(-1, n)], axis=0)
    pg = build_point_geometry(graph, pts, 1)
    sg_x = pg.sqrt_g[0]
    sg_y = pg.sqrt_g[1:].reshape(n, 2)
    gi_y = pg.g_inv[1:].reshape(n, 2, n, n)
    rows = gi_y[np.arange(n), :, np.arange(n), :]                      # (i, s, j): g^ij at y[i, s]
    flux = sg_y * np.einsum("isj,isj->is", rows, grad_y)
    return float(np.sum((flux[:, 0] - flux[:, 1]) / (2.0 * h)) / sg_x)


def laplace_beltrami(graph, field_fn, x, h_step=1e-3):
    """Laplace-Beltrami of a scalar field by the divergence-form chart formula.

    ``(1/sqrt g) d_i (sqrt g g^ij d_j phi)`` with nested second-order
    central differences; evaluated at ``h`` and ``h/2`` and combined by
    Richardson extrapolation.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(graph.contains(x, margin=2.0 * h_step)):
        raise DomainError(
            f"domain error: point {x.tolist()} closer than 2*h={2 * h_step:g} to the domain boundary")
    coarse = _laplace_once(graph, field_fn, x, h_step)
    fine = _laplace_once(graph, field_fn, x, 0.5 * h_step)
    return LaplaceResult(coarse, fine, (4.0 * fine - coarse) / 3.0, h_step)
