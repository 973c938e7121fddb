"""Named example graphs and a seeded random polynomial graph generator."""

from itertools import combinations_with_replacement
from math import sqrt

import numpy as np

from .geometry import GraphMap


def plane(n=2, half_width=100.0):
    return GraphMap.from_strings(["0"], n, [(-half_width, half_width)] * n, "plane")


def affine(n=2, half_width=100.0):
    psi = " + ".join(f"x{i + 1}" for i in range(n))
    return GraphMap.from_strings([psi], n, [(-half_width, half_width)] * n, "affine")


def sphere_cap(r=2.0, n=2, half_width=None):
    """Upper hemisphere of radius ``r`` over a square well inside the disk |x| < r."""
    if half_width is None:
        half_width = 0.85 * r / sqrt(n)
    if half_width * sqrt(n) >= r:
        raise ValueError("domain box must lie inside the open disk of radius r")
    radial = " - ".join(f"x{i + 1}^2" for i in range(n))
    psi = f"sqrt({float(r)!r}^2 - {radial})"
    return GraphMap.from_strings([psi], n, [(-half_width, half_width)] * n, "sphere-cap")


def scherk(half_width=1.5):
    return GraphMap.from_strings(["ln(cos(x1)/cos(x2))"], 2,
                                 [(-half_width, half_width)] * 2, "scherk")


def rank_one_flat(half_width=1.0):
    """psi = (phi, 2 phi): proportional shape operators, hence flat normal bundle, H != 0."""
    phi = "0.4*x1^2 + 0.25*x2^2 + 0.1*x1^3 + 0.15*x1*x2"
    return GraphMap.from_strings([phi, f"2*({phi})"], 2, [(-half_width, half_width)] * 2,
                                 "rank-one-flat")


def nonflat_quadratic(half_width=1.0):
    return GraphMap.from_strings(["x1^2", "x1*x2"], 2, [(-half_width, half_width)] * 2,
                                 "nonflat-quadratic")


BUILTINS = {
    "plane": plane,
    "affine": affine,
    "sphere-cap": sphere_cap,
    "scherk": scherk,
    "rank-one-flat": rank_one_flat,
    "nonflat-quadratic": nonflat_quadratic,
}

FLAT_BUILTINS = ("plane", "affine", "sphere-cap", "scherk", "rank-one-flat")


def builtin(name):
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin graph {name!r}; choose from {', '.join(BUILTINS)}") from None


def random_polynomial_graph(rng, n, k, degree=3, scale=0.5, half_width=1.0):
    """Graph whose components are random polynomials of total degree 2..``degree``.

    Coefficients are drawn uniformly from ``[-scale, scale]``; ``rng`` is a
    :class:`numpy.random.Generator` or a seed.
    """
    rng = np.random.default_rng(rng)
    monomials = [mono for d in range(2, degree + 1)
                 for mono in combinations_with_replacement(range(1, n + 1), d)]
    comps = []
    for _ in range(k):
        coefs = rng.uniform(-scale, scale, len(monomials))
        lin = rng.uniform(-scale, scale, n)
        terms = [f"{float(c)!r}*x{i + 1}" for i, c in enumerate(lin)]
        terms += [f"{float(c)!r}*" + "*".join(f"x{v}" for v in mono) for c, mono in zip(coefs, monomials)]
        comps.append(" + ".join(terms))
    return GraphMap.from_strings(comps, n, [(-half_width, half_width)] * n, "random-polynomial")
