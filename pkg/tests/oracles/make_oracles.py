"""Regenerate ``tests/data/oracles.json``.

Independent of the package: derivatives of psi come from sympy, and all
geometry is assembled frame-free in 40-digit mpmath arithmetic from the
ambient projection ``P = I - T g^-1 T^T``. Run from the repository root::

    python3 tests/oracles/make_oracles.py
"""

import itertools
import json
import os

import mpmath as mp
import sympy as sp

mp.mp.dps = 40

GRAPHS = [
    {"name": "cubic-k1", "n": 2, "psi": ["x1^3 - 0.5*x1*x2 + 0.3*sin(x2)"], "x": ["0.3", "-0.2"]},
    {"name": "quartic-k2", "n": 2,
     "psi": ["x1^2 + 0.3*x1*x2^3 - x2 + 0.2*x1^4", "x1*x2 + 0.5*x2^2*x1 + sin(x1)"],
     "x": ["0.2", "0.1"]},
    {"name": "mixed-n3-k2", "n": 3,
     "psi": ["x1^2 + 0.3*x1*x2^3 - x3 + 0.2*x1^4*x3", "x1*x2 + 0.5*x2^2*x3 + sin(x1)"],
     "x": ["0.1", "-0.2", "0.3"]},
    {"name": "transcendental-k1", "n": 2, "psi": ["exp(0.5*x1)*cos(x2) + ln(2 + x1*x2)"],
     "x": ["0.4", "0.3"]},
    {"name": "sphere-r2-offcenter", "n": 2, "psi": ["sqrt(4 - x1^2 - x2^2)"], "x": ["0.1", "0.2"]},
    {"name": "scherk", "n": 2, "psi": ["ln(cos(x1)/cos(x2))"], "x": ["0.3", "0.2"]},
]

JETS = [
    {"expr": "sin(x1)*exp(x2) + x1^3*x2", "n": 2, "x": ["0.3", "-0.7"]},
    {"expr": "sqrt(1 + x1^2 + x2^2) / (2 + cos(x1*x2))", "n": 2, "x": ["0.5", "0.25"]},
    {"expr": "ln(3 + x1 - x2*x3) * tanh(x3) + sinh(x1)*cosh(x2)", "n": 3, "x": ["0.1", "0.2", "-0.4"]},
    {"expr": "tan(x1)^2 + (1 + x1^2)^(-1.5)", "n": 1, "x": ["0.6"]},
]


def to_sympy(text, n):
    syms = sp.symbols(f"x1:{n + 1}")
    loc = {f"x{i + 1}": s for i, s in enumerate(syms)}
    loc.update({"ln": sp.log, "e": sp.E, "pi": sp.pi})
    return sp.sympify(text.replace("^", "**"), locals=loc, rational=True), syms


def jet_partials(item):
    e, syms = to_sympy(item["expr"], item["n"])
    pt = {s: sp.Rational(v) for s, v in zip(syms, item["x"])}
    out = {}
    for order in range(5):
        for gamma in itertools.product(range(order + 1), repeat=item["n"]):
            if sum(gamma) != order:
                continue
            d = e
            for s, k in zip(syms, gamma):
                if k:
                    d = sp.diff(d, s, k)
            out[",".join(map(str, gamma))] = float(sp.N(d.subs(pt), 30))
    return out


def derivs(psi_exprs, syms, pt):
    """D[c][idx] = d^idx psi_c at pt for |idx| <= 3, as mpf."""
    D = []
    for e in psi_exprs:
        table = {}
        for order in range(4):
            for idx in itertools.combinations_with_replacement(range(len(syms)), order):
                d = e
                for i in idx:
                    d = sp.diff(d, syms[i])
                table[idx] = mp.mpf(str(sp.N(d.subs(pt), 45)))
        D.append(table)
    return D


def geometry(item):
    n = item["n"]
    exprs = []
    for t in item["psi"]:
        e, syms = to_sympy(t, n)
        exprs.append(e)
    k = len(exprs)
    m = n + k
    pt = {s: sp.Rational(v) for s, v in zip(syms, item["x"])}
    D = derivs(exprs, syms, pt)

    def d(c, *idx):
        return D[c][tuple(sorted(idx))]

    # ambient derivatives of f = (x, psi)
    def f1(i):
        v = mp.zeros(m, 1)
        v[i] = 1
        for c in range(k):
            v[n + c] = d(c, i)
        return v

    def f2(i, j):
        v = mp.zeros(m, 1)
        for c in range(k):
            v[n + c] = d(c, i, j)
        return v

    def f3(i, j, l):
        v = mp.zeros(m, 1)
        for c in range(k):
            v[n + c] = d(c, i, j, l)
        return v

    T = mp.zeros(m, n)
    for i in range(n):
        T[:, i] = f1(i)
    g = T.T * T
    gi = mp.inverse(g)
    dT = [mp.zeros(m, n) for _ in range(n)]
    for l in range(n):
        for i in range(n):
            dT[l][:, i] = f2(l, i)
    dg = [dT[l].T * T + T.T * dT[l] for l in range(n)]
    dgi = [-gi * dg[l] * gi for l in range(n)]
    # second derivatives of g
    ddg = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            M = mp.zeros(n, n)
            for i in range(n):
                for j in range(n):
                    M[i, j] = (f3(a, b, i).T * f1(j))[0] + (f2(b, i).T * f2(a, j))[0] \
                        + (f2(a, i).T * f2(b, j))[0] + (f1(i).T * f3(a, b, j))[0]
            ddg[a][b] = M
    P = mp.eye(m) - T * gi * T.T
    dP = [-(dT[l] * gi * T.T + T * dgi[l] * T.T + T * gi * dT[l].T) for l in range(n)]

    II = [[P * f2(i, j) for j in range(n)] for i in range(n)]

    def ip(u, v):
        return (u.T * v)[0]

    normA2 = mp.mpf(0)
    for i, j, a, b in itertools.product(range(n), repeat=4):
        normA2 += gi[i, a] * gi[j, b] * ip(II[i][j], II[a][b])
    Hv = mp.zeros(m, 1)
    for i in range(n):
        for j in range(n):
            Hv += gi[i, j] * II[i][j]
    normH2 = ip(Hv, Hv)

    # Christoffel symbols and their derivatives
    def gamma_(mm, i, j, G, dG):
        return sum(G[mm, p] * (dG[i][p, j] + dG[j][p, i] - dG[p][i, j]) for p in range(n)) / 2

    Gam = [[[gamma_(mm, i, j, gi, dg) for j in range(n)] for i in range(n)] for mm in range(n)]

    def dGam(l, mm, i, j):
        s = mp.mpf(0)
        for p in range(n):
            s += dgi[l][mm, p] * (dg[i][p, j] + dg[j][p, i] - dg[p][i, j])
            s += gi[mm, p] * (ddg[l][i][p, j] + ddg[l][j][p, i] - ddg[l][p][i, j])
        return s / 2

    R = {}
    for i, j, kk, l in itertools.product(range(n), repeat=4):
        s = mp.mpf(0)
        for mm in range(n):
            Rm = dGam(i, mm, j, kk) - dGam(j, mm, i, kk)
            for p in range(n):
                Rm += Gam[p][j][kk] * Gam[mm][i][p] - Gam[p][i][kk] * Gam[mm][j][p]
            s += Rm * g[mm, l]
        R[(i, j, kk, l)] = s

    # normal curvature operators M_ij on R^m (frame free)
    Mij = {}
    for i in range(n):
        for j in range(n):
            M = mp.zeros(m, m)
            for a in range(n):
                for b in range(n):
                    M += gi[a, b] * (II[i][a] * II[j][b].T - II[j][a] * II[i][b].T)
            Mij[(i, j)] = M
    normRperp2 = mp.mpf(0)
    for i, j, a, b in itertools.product(range(n), repeat=4):
        A_, B_ = Mij[(i, j)], Mij[(a, b)]
        normRperp2 += gi[i, a] * gi[j, b] * sum(A_[r, c] * B_[r, c] for r in range(m) for c in range(m))

    # covariant derivative of A and H in the ambient picture
    def dII(l, i, j):
        return dP[l] * f2(i, j) + P * f3(l, i, j)

    def nablaA(l, i, j):
        v = P * dII(l, i, j)
        for p in range(n):
            v -= Gam[p][l][i] * II[p][j] + Gam[p][l][j] * II[i][p]
        return v

    NA = {(l, i, j): nablaA(l, i, j) for l, i, j in itertools.product(range(n), repeat=3)}
    normGradA2 = mp.mpf(0)
    for (l, i, j), (a, b, c) in itertools.product(NA, NA):
        normGradA2 += gi[l, a] * gi[i, b] * gi[j, c] * ip(NA[(l, i, j)], NA[(a, b, c)])
    dH = []
    for l in range(n):
        v = mp.zeros(m, 1)
        for i in range(n):
            for j in range(n):
                v += dgi[l][i, j] * II[i][j] + gi[i, j] * dII(l, i, j)
        dH.append(P * v)
    normGradH2 = sum(gi[a, b] * ip(dH[a], dH[b]) for a in range(n) for b in range(n))

    detg = mp.det(g)
    return {
        "g": [[float(g[i, j]) for j in range(n)] for i in range(n)],
        "sqrt_g": float(mp.sqrt(detg)),
        "w": float(1 / mp.sqrt(detg)),
        "normA2": float(normA2),
        "normH2": float(normH2),
        "normRperp2": float(normRperp2),
        "normGradA2": float(normGradA2),
        "normGradH2": float(normGradH2),
        "R": [[[[float(R[(i, j, kk, l)]) for l in range(n)] for kk in range(n)]
               for j in range(n)] for i in range(n)],
    }


def main():
    out = {"geometry": [], "jets": []}
    for item in GRAPHS:
        out["geometry"].append(dict(item, values=geometry(item)))
        print("geometry", item["name"])
    for item in JETS:
        out["jets"].append(dict(item, partials=jet_partials(item)))
        print("jets", item["expr"])
    path = os.path.join(os.path.dirname(__file__), "..", "data", "oracles.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
