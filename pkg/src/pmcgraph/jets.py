"""Multivariate truncated Taylor arithmetic ("jets").

A :class:`Jet` stores the Taylor coefficients ``d^g f(x) / g!`` of a scalar
quantity at a point for every multi-index ``g`` with ``|g| <= order``
(``order <= 4``). Coefficients live on the last array axis in graded
lexicographic order; all leading axes are batch/tensor axes and broadcast
like numpy arrays. That lets one ``Jet`` hold, e.g., every metric component
at every quadrature node at once.
"""

from functools import lru_cache
from itertools import product as _iproduct
from math import comb, factorial, prod
from numbers import Number

import numpy as np

from . import _accel
from .errors import DomainError, JetError

MAX_ORDER = 4


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def multi_indices(n, order):
    """All multi-indices with ``|g| <= order`` in graded lexicographic order."""
    out = []
    for d in range(order + 1):
        out.extend(_compositions(d, n))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_map(n, order):
    return {g: i for i, g in enumerate(multi_indices(n, order))}


def ncoef(n, order):
    return comb(n + order, order)


class _ProductTable:
    __slots__ = ("left", "right", "target", "starts", "nout")

    def __init__(self, left, right, target, nout):
        self.left = left
        self.right = right
        self.target = target
        self.nout = nout
        self.starts = np.searchsorted(target, np.arange(nout)).astype(np.intp)


@lru_cache(maxsize=None)
def product_table(n, order):
    """Index triples ``(i, j, t)`` with ``g_i + g_j = g_t`` sorted by ``t``."""
    idx = multi_indices(n, order)
    where = _index_map(n, order)
    triples = []
    for t, gt in enumerate(idx):
        # every split of g_t into g_i + g_j
        for gi in _iproduct(*(range(c + 1) for c in gt)):
            gj = tuple(a - b for a, b in zip(gt, gi))
            triples.append((where[gi], where[gj], t))
    arr = np.array(triples, dtype=np.int64)
    return _ProductTable(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), len(idx))


@lru_cache(maxsize=None)
def _derivative_table(n, order, k):
    # d/dx_k maps coefficient of g + e_k (weight g_k + 1) onto g
    lower = multi_indices(n, order - 1)
    where = _index_map(n, order)
    src = np.empty(len(lower), dtype=np.intp)
    fac = np.empty(len(lower))
    for i, g in enumerate(lower):
        up = list(g)
        up[k] += 1
        src[i] = where[tuple(up)]
        fac[i] = up[k]
    return src, fac


class Jet:
    """Truncated Taylor expansion in ``n`` variables up to total degree ``order``.

    Parameters
    ----------
    coeffs : array_like, shape (..., ncoef(n, order))
        Taylor coefficients; leading axes are batch/tensor axes.
    n : int
        Number of variables.
    order : int
        Truncation degree, ``0 <= order <= 4``.
    """

    __slots__ = ("coeffs", "n", "order")
    __array_priority__ = 100

    def __init__(self, coeffs, n, order):
        if not 0 <= order <= MAX_ORDER:
            raise JetError(f"jet order must be in [0, {MAX_ORDER}], got {order}")
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.ndim == 0 or coeffs.shape[-1] != ncoef(n, order):
            raise JetError(
                f"coefficient axis has length {coeffs.shape[-1] if coeffs.ndim else 0}, "
                f"expected {ncoef(n, order)} for n={n}, order={order}")
        self.coeffs = coeffs
        self.n = n
        self.order = order

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, n, order):
        value = np.asarray(value, dtype=np.float64)
        c = np.zeros(value.shape + (ncoef(n, order),))
        c[..., 0] = value
        return cls(c, n, order)

    @classmethod
    def zeros(cls, shape, n, order):
        return cls(np.zeros(tuple(shape) + (ncoef(n, order),)), n, order)

    @classmethod
    def variables(cls, x, order):
        """Jets of the coordinate functions at ``x``; lead shape ``x.shape``."""
        x = np.asarray(x, dtype=np.float64)
        n = x.shape[-1]
        c = np.zeros(x.shape + (ncoef(n, order),))
        c[..., 0] = x
        if order >= 1:
            for i in range(n):
                c[..., i, 1 + i] = 1.0
        return cls(c, n, order)

    # -- views ------------------------------------------------------------
    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    @property
    def value(self):
        return self.coeffs[..., 0]

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.coeffs[idx + (slice(None),)], self.n, self.order)

    def __repr__(self):
        return f"Jet(n={self.n}, order={self.order}, shape={self.shape})"

    def coefficient(self, gamma):
        gamma = tuple(int(g) for g in gamma)
        if len(gamma) != self.n:
            raise JetError(f"multi-index {gamma} has wrong length for n={self.n}")
        if sum(gamma) > self.order:
            raise JetError(f"|{gamma}| = {sum(gamma)} exceeds jet order {self.order}")
        return self.coeffs[..., _index_map(self.n, self.order)[gamma]]

    def partial(self, gamma):
        """The partial derivative ``d^gamma f`` at the expansion point."""
        return self.coefficient(gamma) * prod(factorial(int(g)) for g in gamma)

    def gradient(self):
        if self.order < 1:
            raise JetError("gradient needs order >= 1")
        return self.coeffs[..., 1:1 + self.n].copy()

    def hessian(self):
        if self.order < 2:
            raise JetError("hessian needs order >= 2")
        out = np.empty(self.shape + (self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                g = [0] * self.n
                g[i] += 1
                g[j] += 1
                out[..., i, j] = self.partial(g)
        return out

    # -- structural -------------------------------------------------------
    def truncate(self, order):
        if order > self.order:
            raise JetError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self.coeffs[..., :ncoef(self.n, order)], self.n, order)

    def deriv(self, k):
        """Jet of ``d f / d x_k`` (one order lower)."""
        if self.order < 1:
            raise JetError("cannot differentiate an order-0 jet")
        src, fac = _derivative_table(self.n, self.order, k)
        return Jet(self.coeffs[..., src] * fac, self.n, self.order - 1)

    def sum(self, axis):
        axes = axis if isinstance(axis, tuple) else (axis,)
        nd = len(self.shape)
        axes = tuple(a if a >= 0 else nd + a for a in axes)
        if any(a < 0 or a >= nd for a in axes):
            raise JetError(f"axis {axis} out of range for jet shape {self.shape}")
        return Jet(self.coeffs.sum(axis=axes), self.n, self.order)

    def expand(self, axis):
        """Insert a broadcast axis among the lead axes."""
        nd = len(self.shape)
        if axis < 0:
            axis = nd + 1 + axis
        return Jet(np.expand_dims(self.coeffs, axis), self.n, self.order)

    def transpose(self, *axes):
        return Jet(np.transpose(self.coeffs, tuple(axes) + (len(axes),)), self.n, self.order)

    # -- arithmetic -------------------------------------------------------
    def _check(self, other):
        if other.n != self.n or other.order != self.order:
            raise JetError(
                f"jet mismatch: (n={self.n}, order={self.order}) vs "
                f"(n={other.n}, order={other.order})")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.coeffs + other.coeffs, self.n, self.order)
        other = np.asarray(other, dtype=np.float64)
        c = np.array(np.broadcast_to(self.coeffs, np.broadcast_shapes(self.coeffs.shape, other.shape + (1,))))
        c[..., 0] += other
        return Jet(c, self.n, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.n, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            a, b = np.broadcast_arrays(self.coeffs, other.coeffs)
            lead = a.shape[:-1]
            nc = a.shape[-1]
            table = product_table(self.n, self.order)
            out = _accel.cauchy(a.reshape(-1, nc), b.reshape(-1, nc), table)
            return Jet(out.reshape(lead + (nc,)), self.n, self.order)
        other = np.asarray(other, dtype=np.float64)
        return Jet(self.coeffs * other[..., None], self.n, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        other = np.asarray(other, dtype=np.float64)
        return Jet(self.coeffs / other[..., None], self.n, self.order)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        return power(self, p)


def stack(jets, axis=0):
    """Stack jets of equal shape along a new lead axis."""
    jets = list(jets)
    if not jets:
        raise JetError("cannot stack an empty sequence of jets")
    first = jets[0]
    for j in jets[1:]:
        first._check(j)
    nd = len(first.shape)
    if axis < 0:
        axis = nd + 1 + axis
    return Jet(np.stack([j.coeffs for j in jets], axis=axis), first.n, first.order)


def _require_same(a, b):
    if not isinstance(a, Jet) or not isinstance(b, Jet):
        raise JetError("both operands must be jets")
    a._check(b)


def jet_add(a, b):
    _require_same(a, b)
    return a + b


def jet_sub(a, b):
    _require_same(a, b)
    return a - b


def jet_mul(a, b):
    _require_same(a, b)
    return a * b


def jet_div(a, b):
    _require_same(a, b)
    return a * reciprocal(b)


def jet_compose_univariate(outer, a):
    """Compose a univariate Taylor table with a jet.

    ``outer[..., d]`` holds ``f^(d)(a0) / d!`` at the constant term ``a0`` of
    ``a`` for ``d = 0..a.order``. Evaluated by Horner's rule in the nilpotent
    part ``a - a0``.
    """
    outer = np.asarray(outer, dtype=np.float64)
    if outer.shape[-1] < a.order + 1:
        raise JetError(f"univariate table has {outer.shape[-1]} terms, need {a.order + 1}")
    u = Jet(a.coeffs.copy(), a.n, a.order)
    u.coeffs[..., 0] = 0.0
    res = Jet.constant(outer[..., a.order], a.n, a.order)
    for d in range(a.order - 1, -1, -1):
        res = res * u + outer[..., d]
    if res.shape != a.shape:
        res = Jet(np.broadcast_to(res.coeffs, a.coeffs.shape).copy(), a.n, a.order)
    return res


def partial(a, gamma):
    return a.partial(gamma)


# -- univariate Taylor tables ----------------------------------------------

_INV_FACT = np.array([1.0 / factorial(d) for d in range(MAX_ORDER + 1)])


def _cyclic(vals, order):
    # vals: derivative values cycling with period len(vals)
    out = np.stack([vals[d % len(vals)] for d in range(order + 1)], axis=-1)
    return out * _INV_FACT[:order + 1]


def _table_exp(a0, order):
    e = np.exp(a0)
    return e[..., None] * _INV_FACT[:order + 1]


def _table_sin(a0, order):
    s, c = np.sin(a0), np.cos(a0)
    return _cyclic([s, c, -s, -c], order)


def _table_cos(a0, order):
    s, c = np.sin(a0), np.cos(a0)
    return _cyclic([c, -s, -c, s], order)


def _table_sinh(a0, order):
    s, c = np.sinh(a0), np.cosh(a0)
    return _cyclic([s, c], order)


def _table_cosh(a0, order):
    s, c = np.sinh(a0), np.cosh(a0)
    return _cyclic([c, s], order)


def _table_log(a0, order):
    if np.any(a0 <= 0):
        raise DomainError("logarithm of a nonpositive value")
    out = np.empty(a0.shape + (order + 1,))
    out[..., 0] = np.log(a0)
    for d in range(1, order + 1):
        out[..., d] = (-1.0) ** (d + 1) / (d * a0 ** d)
    return out


def _binom_real(p, d):
    num = 1.0
    for i in range(d):
        num *= p - i
    return num / factorial(d)


def _table_power(a0, order, p):
    p = float(p)
    integral = p == int(p)
    if integral:
        if p < 0 and np.any(a0 == 0):
            raise DomainError(f"negative power {p:g} of zero")
    else:
        if np.any(a0 < 0):
            raise DomainError(f"non-integer power {p:g} of a negative value")
        if order > 0 and np.any(a0 == 0) and p < order:
            raise DomainError(f"power {p:g} is not differentiable at zero")
    out = np.empty(a0.shape + (order + 1,))
    for d in range(order + 1):
        c = _binom_real(p, d)
        if c == 0.0:
            out[..., d] = 0.0
        else:
            out[..., d] = c * a0 ** (p - d)
    return out


def exp(a):
    return jet_compose_univariate(_table_exp(a.value, a.order), a)


def log(a):
    return jet_compose_univariate(_table_log(a.value, a.order), a)


def sin(a):
    return jet_compose_univariate(_table_sin(a.value, a.order), a)


def cos(a):
    return jet_compose_univariate(_table_cos(a.value, a.order), a)


def sinh(a):
    return jet_compose_univariate(_table_sinh(a.value, a.order), a)


def cosh(a):
    return jet_compose_univariate(_table_cosh(a.value, a.order), a)


def tan(a):
    c = cos(a)
    if np.any(np.abs(c.value) < 1e-300):
        raise DomainError("tangent at a pole")
    return sin(a) * reciprocal(c)


def tanh(a):
    return sinh(a) * reciprocal(cosh(a))


def reciprocal(a):
    if np.any(a.value == 0):
        raise DomainError("division by a jet with zero constant term")
    return jet_compose_univariate(_table_power(a.value, a.order, -1.0), a)


def sqrt(a):
    return jet_compose_univariate(_table_power(a.value, a.order, 0.5), a)


def ipow(a, p):
    """Non-negative integer power by repeated squaring (exact on polynomials)."""
    result = Jet.constant(np.ones(a.shape), a.n, a.order)
    base = a
    while p:
        if p & 1:
            result = result * base
        p >>= 1
        if p:
            base = base * base
    return result


def power(a, p):
    if isinstance(p, Number) and float(p) == int(p) and p >= 0:
        return ipow(a, int(p))
    return jet_compose_univariate(_table_power(a.value, a.order, p), a)


ELEMENTARY = {
    "sin": sin, "cos": cos, "tan": tan,
    "exp": exp, "ln": log, "sqrt": sqrt,
    "sinh": sinh, "cosh": cosh, "tanh": tanh,
}


def jeinsum(subscripts, a, b):
    """Two-operand einsum over the lead axes of jets (products are jet products).

    Either operand may be a plain array, treated as constant. Repeated labels
    inside one operand are not supported.
    """
    ins, out = subscripts.replace(" ", "").split("->")
    la, lb = ins.split(",")
    labels = list(out) + [c for c in dict.fromkeys(la + lb) if c not in out]

    def align(op, lab):
        arr = op.coeffs if isinstance(op, Jet) else np.asarray(op, dtype=np.float64)
        tail = 1 if isinstance(op, Jet) else 0
        if len(set(lab)) != len(lab):
            raise JetError(f"repeated label in {lab!r}")
        if arr.ndim - tail != len(lab):
            raise JetError(f"operand has {arr.ndim - tail} lead axes, subscripts {lab!r}")
        present = [c for c in labels if c in lab]
        perm = [lab.index(c) for c in present] + ([arr.ndim - 1] if tail else [])
        arr = np.transpose(arr, perm)
        shape = []
        it = iter(arr.shape)
        for c in labels:
            shape.append(next(it) if c in lab else 1)
        shape += list(it)
        arr = arr.reshape(shape)
        return Jet(arr, op.n, op.order) if isinstance(op, Jet) else arr

    A = align(a, la)
    Bq = align(b, lb)
    if isinstance(A, Jet):
        prodj = A * Bq
    elif isinstance(Bq, Jet):
        prodj = Bq * A
    else:
        raise JetError("jeinsum needs at least one jet operand")
    nsum = len(labels) - len(out)
    if nsum:
        prodj = prodj.sum(tuple(range(len(out), len(labels))))
    return prodj
