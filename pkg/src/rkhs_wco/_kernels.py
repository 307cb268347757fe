"""Hot loops of the series algebra and of kernel summation.

Every kernel exists twice: a plain-loop version compiled with ``numba.njit``
and a vectorised pure-numpy version with the same semantics and the same
summation order.  The compiled path is selected when numba imports and the
environment variable ``RKHS_WCO_DISABLE_JIT`` is unset or ``"0"``.

Multiplication tables are triples ``(ii, jj, kk)`` of basis indices meaning
``z^ii * z^jj = z^kk``, sorted by ``kk`` (stable), so that a single forward
sweep sees every product contributing to a coefficient before moving on.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_ENV_FLAG = "RKHS_WCO_DISABLE_JIT"


def _jit_requested() -> bool:
    return os.environ.get(JIT_ENV_FLAG, "0").strip().lower() in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# plain loops (compiled by numba when available)


def _loop_cauchy_product(a, b, ii, jj, kk, n):
    out = np.zeros(n, dtype=np.complex128)
    for t in range(ii.shape[0]):
        out[kk[t]] += a[ii[t]] * b[jj[t]]
    return out


def _loop_triangular_solve(c, p, q, ii, jj, kk, deg, w0, wa, wb):
    # x[k] = p[k] + q[k] * sum_{(i,j)->k} c[i] * (w0 + wa*deg[i] + wb*deg[j]) * x[j]
    # the table must exclude i == 0 so that every j on the right precedes k
    n = p.shape[0]
    m = kk.shape[0]
    x = np.zeros(n, dtype=np.complex128)
    ptr = 0
    for k in range(n):
        acc = 0j
        while ptr < m and kk[ptr] == k:
            i = ii[ptr]
            j = jj[ptr]
            acc += c[i] * (w0 + wa * deg[i] + wb * deg[j]) * x[j]
            ptr += 1
        x[k] = p[k] + q[k] * acc
    return x


def _loop_partial_sums(coef, t, tol):
    n = t.shape[0]
    L = coef.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    used = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    for e in range(n):
        s = 0j
        pw = 1.0 + 0j
        te = t[e]
        k = 0
        while k < L:
            an = coef[k]
            if an != 0.0:
                term = an * pw
                s += term
                if k > 0 and abs(term) <= tol * max(abs(s), 1e-300):
                    done[e] = True
                    k += 1
                    break
            pw *= te
            k += 1
        out[e] = s
        used[e] = k
    return out, used, done


# ---------------------------------------------------------------------------
# numpy equivalents


def _np_cauchy_product(a, b, ii, jj, kk, n):
    prod = a[ii] * b[jj]
    out = np.bincount(kk, weights=prod.real, minlength=n) + 1j * np.bincount(
        kk, weights=prod.imag, minlength=n
    )
    return out.astype(np.complex128)


def _np_triangular_solve(c, p, q, ii, jj, kk, deg, w0, wa, wb):
    n = p.shape[0]
    x = np.zeros(n, dtype=np.complex128)
    if kk.shape[0] == 0:
        x[:] = p
        return x
    # indices of each total degree are contiguous; j always has lower degree than k
    x[0] = p[0]
    kdeg = deg[kk]
    starts = np.searchsorted(kdeg, np.arange(deg.max() + 2))
    weight = c[ii] * (w0 + wa * deg[ii] + wb * deg[jj])
    for level in range(1, deg.max() + 1):
        lo, hi = starts[level], starts[level + 1]
        sel = slice(lo, hi)
        prod = weight[sel] * x[jj[sel]]
        acc = np.bincount(kk[sel], weights=prod.real, minlength=n) + 1j * np.bincount(
            kk[sel], weights=prod.imag, minlength=n
        )
        mask = deg == level
        x[mask] = p[mask] + q[mask] * acc[mask]
    x[deg == 0] = p[deg == 0]
    return x


def _np_partial_sums(coef, t, tol):
    n = t.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    used = np.full(n, coef.shape[0], dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    pw = np.ones(n, dtype=np.complex128)
    for k in range(coef.shape[0]):
        if not active.any():
            break
        an = coef[k]
        if an != 0.0:
            term = an * pw[active]
            s = out[active] + term
            out[active] = s
            if k > 0:
                stop = np.abs(term) <= tol * np.maximum(np.abs(s), 1e-300)
                if stop.any():
                    idx = np.flatnonzero(active)[stop]
                    done[idx] = True
                    used[idx] = k + 1
                    active[idx] = False
        pw[active] *= t[active]
    return out, used, done


NUMPY = SimpleNamespace(
    name="numpy",
    cauchy_product=_np_cauchy_product,
    triangular_solve=_np_triangular_solve,
    partial_sums=_np_partial_sums,
)

if numba is not None:
    _jit = numba.njit(cache=True)
    NUMBA = SimpleNamespace(
        name="numba",
        cauchy_product=_jit(_loop_cauchy_product),
        triangular_solve=_jit(_loop_triangular_solve),
        partial_sums=_jit(_loop_partial_sums),
    )
else:  # pragma: no cover
    NUMBA = None

ACTIVE = NUMBA if (NUMBA is not None and _jit_requested()) else NUMPY


def backend() -> str:
    """Name of the kernel implementation in use (``"numba"`` or ``"numpy"``)."""
    return ACTIVE.name


def cauchy_product(a, b, ii, jj, kk, n):
    return ACTIVE.cauchy_product(a, b, ii, jj, kk, n)


def triangular_solve(c, p, q, ii, jj, kk, deg, w0, wa, wb):
    return ACTIVE.triangular_solve(c, p, q, ii, jj, kk, deg, float(w0), float(wa), float(wb))


def partial_sums(coef, t, tol):
    return ACTIVE.partial_sums(coef, t, float(tol))
