"""Hot kernels for truncated Taylor arithmetic.

Two interchangeable backends compute the batched Cauchy product of jet
coefficient rows:

* a numba ``@njit`` loop (default when numba imports), and
* a pure numpy gather/``reduceat`` path.

Set ``PMCGRAPH_NUMBA=0`` in the environment before import to force the numpy
path. In both backends each output row depends only on its own input rows,
so chunking a batch never changes results. The two backends may differ from
each other in the last bits (different summation order).
"""

import os

import numpy as np

_WANT_NUMBA = os.environ.get("PMCGRAPH_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _WANT_NUMBA:
        raise ImportError("numba disabled by PMCGRAPH_NUMBA")
    from numba import njit
    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def decorator(func):
            return func
        return decorator


BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"


@njit(cache=True, nogil=True)
def _cauchy_loop(a, b, left, right, target, nout):
    rows = a.shape[0]
    out = np.zeros((rows, nout))
    nterms = left.shape[0]
    for r in range(rows):
        for p in range(nterms):
            out[r, target[p]] += a[r, left[p]] * b[r, right[p]]
    return out


def _cauchy_numpy(a, b, left, right, starts):
    prod = a[:, left] * b[:, right]
    return np.add.reduceat(prod, starts, axis=1)


def cauchy_numba(a, b, table):
    return _cauchy_loop(a, b, table.left, table.right, table.target, table.nout)


def cauchy_numpy(a, b, table):
    if a.shape[0] == 0:
        return np.zeros((0, table.nout))
    return _cauchy_numpy(a, b, table.left, table.right, table.starts)


def cauchy(a, b, table):
    """Truncated product of coefficient rows ``a`` and ``b`` (both 2-D, C order)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if NUMBA_AVAILABLE:
        return cauchy_numba(a, b, table)
    return cauchy_numpy(a, b, table)
