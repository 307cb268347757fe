"""Truncated multivariate power series with complex coefficients.

A :class:`TruncatedSeries` in ``d`` variables of order ``N`` stores every
coefficient of total degree ``<= N``.  Arithmetic is exact through degree
``N`` up to floating point rounding: products discard terms of degree
``> N`` and never invent a tail.

Coefficients are held in a dense vector over the graded-lexicographic
monomial basis of the pair ``(d, N)``; missing monomials are zeros.  The
:attr:`TruncatedSeries.coeffs` view presents the same data as a sparse map
``MultiIndex -> complex``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, SingularityError, StructuralError

DEFAULT_MAX_DEGREE = 10


class MultiIndex(tuple):
    """Exponent tuple ``alpha`` of a monomial ``z^alpha``."""

    def __new__(cls, entries: Iterable[int]):
        entries = tuple(int(e) for e in entries)
        if any(e < 0 for e in entries):
            raise StructuralError(f"negative exponent in multi-index {entries}")
        return super().__new__(cls, entries)

    @property
    def entries(self) -> tuple[int, ...]:
        return tuple(self)

    @property
    def degree(self) -> int:
        return sum(self)

    def factorial(self) -> int:
        out = 1
        for e in self:
            out *= factorial(e)
        return out

    def __repr__(self) -> str:
        return f"MultiIndex({tuple(self)})"


def _compositions(n: int, parts: int):
    # lexicographically descending: (n,0,...,0) first
    if parts == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class Basis:
    """Monomial basis of total degree ``<= max_degree`` in ``dim`` variables."""

    dim: int
    max_degree: int
    exps: np.ndarray  # (size, dim)
    deg: np.ndarray  # (size,)
    index: Mapping[tuple, int]
    ii: np.ndarray
    jj: np.ndarray
    kk: np.ndarray
    nz_ii: np.ndarray  # the table without products by the constant monomial
    nz_jj: np.ndarray
    nz_kk: np.ndarray
    pred_index: np.ndarray  # alpha - e_j for the first j with alpha_j > 0
    pred_var: np.ndarray
    upto: np.ndarray  # upto[n] = number of monomials of degree <= n

    @property
    def size(self) -> int:
        return self.exps.shape[0]

    def multi_indices(self) -> list[MultiIndex]:
        return [MultiIndex(row) for row in self.exps]


@lru_cache(maxsize=None)
def basis(dim: int, max_degree: int) -> Basis:
    if dim < 1:
        raise StructuralError("dimension must be at least 1")
    if max_degree < 0:
        raise StructuralError("truncation order must be non-negative")
    rows = [c for n in range(max_degree + 1) for c in _compositions(n, dim)]
    exps = np.array(rows, dtype=np.int64).reshape(len(rows), dim)
    deg = exps.sum(axis=1)
    index = {tuple(r): i for i, r in enumerate(rows)}
    upto = np.searchsorted(deg, np.arange(max_degree + 1), side="right")

    radix = (max_degree + 1) ** np.arange(dim, dtype=np.int64)
    keys = exps @ radix
    order = np.argsort(keys)
    sorted_keys = keys[order]

    ii_parts, jj_parts = [], []
    for i in range(len(rows)):
        m = upto[max_degree - deg[i]]
        ii_parts.append(np.full(m, i, dtype=np.int64))
        jj_parts.append(np.arange(m, dtype=np.int64))
    ii = np.concatenate(ii_parts)
    jj = np.concatenate(jj_parts)
    kk = order[np.searchsorted(sorted_keys, (exps[ii] + exps[jj]) @ radix)]
    perm = np.argsort(kk, kind="stable")
    ii, jj, kk = ii[perm], jj[perm], kk[perm]
    nz = ii != 0

    pred_index = np.zeros(len(rows), dtype=np.int64)
    pred_var = np.zeros(len(rows), dtype=np.int64)
    for k in range(1, len(rows)):
        j = int(np.flatnonzero(exps[k])[0])
        prev = exps[k].copy()
        prev[j] -= 1
        pred_index[k] = index[tuple(prev)]
        pred_var[k] = j

    return Basis(
        dim=dim,
        max_degree=max_degree,
        exps=exps,
        deg=deg,
        index=index,
        ii=ii,
        jj=jj,
        kk=kk,
        nz_ii=ii[nz],
        nz_jj=jj[nz],
        nz_kk=kk[nz],
        pred_index=pred_index,
        pred_var=pred_var,
        upto=upto,
    )


class TruncatedSeries:
    """Polynomial truncation ``sum_{|alpha| <= N} c_alpha z^alpha``.

    Instances are immutable.  Supports ``+ - * /`` with series and scalars,
    ``** gamma`` for real ``gamma`` (principal branch) and evaluation by
    calling the series on points of shape ``(..., dim)``.
    """

    __slots__ = ("_basis", "_c")
    __array_priority__ = 100

    def __init__(
        self,
        dim: int,
        max_degree: int = DEFAULT_MAX_DEGREE,
        coeffs: Mapping[Sequence[int], complex] | None = None,
    ):
        b = basis(dim, max_degree)
        c = np.zeros(b.size, dtype=np.complex128)
        for alpha, value in (coeffs or {}).items():
            alpha = tuple(alpha)
            if len(alpha) != dim:
                raise StructuralError(f"multi-index {alpha} has length {len(alpha)}, expected {dim}")
            if sum(alpha) > max_degree:
                raise StructuralError(f"multi-index {alpha} exceeds truncation order {max_degree}")
            c[b.index[alpha]] += value
        self._init(b, c)

    def _init(self, b: Basis, c: np.ndarray) -> None:
        c.setflags(write=False)
        self._basis = b
        self._c = c

    @classmethod
    def _wrap(cls, b: Basis, c: np.ndarray) -> "TruncatedSeries":
        obj = cls.__new__(cls)
        obj._init(b, np.ascontiguousarray(c, dtype=np.complex128))
        return obj

    @classmethod
    def from_array(cls, dim: int, max_degree: int, values) -> "TruncatedSeries":
        """Build from a dense coefficient vector in graded-lex basis order."""
        b = basis(dim, max_degree)
        values = np.array(values, dtype=np.complex128)
        if values.shape != (b.size,):
            raise StructuralError(f"expected {b.size} coefficients, got shape {values.shape}")
        return cls._wrap(b, values)

    @classmethod
    def constant(cls, value: complex, dim: int, max_degree: int = DEFAULT_MAX_DEGREE) -> "TruncatedSeries":
        b = basis(dim, max_degree)
        c = np.zeros(b.size, dtype=np.complex128)
        c[0] = value
        return cls._wrap(b, c)

    @classmethod
    def variable(cls, j: int, dim: int, max_degree: int = DEFAULT_MAX_DEGREE) -> "TruncatedSeries":
        """The coordinate function ``z_{j+1}`` (0-based ``j``)."""
        b = basis(dim, max_degree)
        c = np.zeros(b.size, dtype=np.complex128)
        if max_degree >= 1:
            c[1 + j] = 1.0
        return cls._wrap(b, c)

    @classmethod
    def zeros(cls, dim: int, max_degree: int = DEFAULT_MAX_DEGREE) -> "TruncatedSeries":
        return cls._wrap(basis(dim, max_degree), np.zeros(basis(dim, max_degree).size, dtype=np.complex128))

    # -- views -------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self._basis.dim

    @property
    def max_degree(self) -> int:
        return self._basis.max_degree

    @property
    def basis(self) -> Basis:
        return self._basis

    @property
    def array(self) -> np.ndarray:
        """Read-only dense coefficient vector (graded-lex order)."""
        return self._c

    @property
    def coeffs(self) -> dict[MultiIndex, complex]:
        nz = np.flatnonzero(self._c)
        return {MultiIndex(self._basis.exps[k]): complex(self._c[k]) for k in nz}

    @property
    def constant_term(self) -> complex:
        return complex(self._c[0])

    def __getitem__(self, alpha: Sequence[int]) -> complex:
        alpha = tuple(alpha)
        if len(alpha) != self.dim:
            raise StructuralError(f"multi-index {alpha} has wrong length")
        if sum(alpha) > self.max_degree:
            return 0j
        return complex(self._c[self._basis.index[alpha]])

    def homogeneous_part(self, n: int) -> "TruncatedSeries":
        c = np.where(self._basis.deg == n, self._c, 0)
        return TruncatedSeries._wrap(self._basis, c)

    def truncate(self, n: int) -> "TruncatedSeries":
        """Re-truncate to a lower order ``n`` (changes the basis)."""
        if n > self.max_degree:
            raise StructuralError("cannot raise the truncation order")
        b = basis(self.dim, n)
        return TruncatedSeries._wrap(b, self._c[: b.size].copy())

    def allclose(self, other: "TruncatedSeries", atol: float = 1e-12) -> bool:
        _check_match(self, other)
        return bool(np.max(np.abs(self._c - other._c), initial=0.0) <= atol)

    def __repr__(self) -> str:
        terms = ", ".join(f"{tuple(k)}: {v:.6g}" for k, v in list(self.coeffs.items())[:8])
        more = " ..." if np.count_nonzero(self._c) > 8 else ""
        return f"TruncatedSeries(dim={self.dim}, N={self.max_degree}, {{{terms}{more}}})"

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return other
        if np.isscalar(other) or isinstance(other, (int, float, complex, np.number)):
            return TruncatedSeries.constant(complex(other), self.dim, self.max_degree)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries._wrap(self._basis, -self._c)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(self, -other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(other, -self)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return mul(self, other)
        if np.isscalar(other) or isinstance(other, np.number):
            return TruncatedSeries._wrap(self._basis, self._c * complex(other))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return mul(self, reciprocal(other))
        if np.isscalar(other) or isinstance(other, np.number):
            return TruncatedSeries._wrap(self._basis, self._c / complex(other))
        return NotImplemented

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return mul(other, reciprocal(self))

    def __pow__(self, gamma):
        if isinstance(gamma, (int, np.integer)) and gamma >= 0:
            out = TruncatedSeries.constant(1.0, self.dim, self.max_degree)
            for _ in range(int(gamma)):
                out = mul(out, self)
            return out
        return pow_real(self, float(gamma))

    def __call__(self, z) -> np.ndarray | complex:
        return evaluate(self, z)


def _check_match(s: TruncatedSeries, t: TruncatedSeries) -> None:
    if s.dim != t.dim or s.max_degree != t.max_degree:
        raise StructuralError(
            f"series mismatch: (dim={s.dim}, N={s.max_degree}) vs (dim={t.dim}, N={t.max_degree})"
        )


def add(s: TruncatedSeries, t: TruncatedSeries) -> TruncatedSeries:
    _check_match(s, t)
    return TruncatedSeries._wrap(s.basis, s.array + t.array)


def mul(s: TruncatedSeries, t: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product, dropping every term of degree above the truncation order."""
    _check_match(s, t)
    b = s.basis
    return TruncatedSeries._wrap(b, _kernels.cauchy_product(s.array, t.array, b.ii, b.jj, b.kk, b.size))


def _solve(c, p, q, b: Basis, w0, wa, wb) -> np.ndarray:
    return _kernels.triangular_solve(
        np.ascontiguousarray(c), p, q, b.nz_ii, b.nz_jj, b.nz_kk, b.deg, w0, wa, wb
    )


def reciprocal(s: TruncatedSeries) -> TruncatedSeries:
    """``1/s`` through the truncation order, solved degree by degree."""
    c0 = s.constant_term
    if c0 == 0:
        raise SingularityError("reciprocal of a series with zero constant term")
    b = s.basis
    p = np.zeros(b.size, dtype=np.complex128)
    p[0] = 1.0 / c0
    q = np.full(b.size, -1.0 / c0, dtype=np.complex128)
    return TruncatedSeries._wrap(b, _solve(s.array, p, q, b, 1.0, 0.0, 0.0))


def _inv_degree(b: Basis) -> np.ndarray:
    q = np.zeros(b.size, dtype=np.complex128)
    q[1:] = 1.0 / b.deg[1:]
    return q


def exp_series(s: TruncatedSeries) -> TruncatedSeries:
    """``exp(s)``; uses ``E exp(w) = exp(w) * E w`` with ``E`` the degree operator."""
    b = s.basis
    w = s.array.copy()
    c0 = w[0]
    w[0] = 0.0
    p = np.zeros(b.size, dtype=np.complex128)
    p[0] = 1.0
    v = _solve(w, p, _inv_degree(b), b, 0.0, 1.0, 0.0)
    return TruncatedSeries._wrap(b, v * cmath.exp(c0))


def log_series(s: TruncatedSeries) -> TruncatedSeries:
    """Principal ``log(s)``; the constant term must not lie on ``(-inf, 0]``."""
    c0 = s.constant_term
    if c0 == 0 or (c0.imag == 0 and c0.real < 0):
        raise DomainError(f"log of a series with constant term {c0} is not principal-analytic")
    b = s.basis
    u = s.array / c0
    p = u.copy()
    p[0] = 0.0
    x = _solve(u, p, -_inv_degree(b), b, 0.0, 0.0, 1.0)
    x[0] = cmath.log(c0)
    return TruncatedSeries._wrap(b, x)


def pow_real(s: TruncatedSeries, gamma: float) -> TruncatedSeries:
    """``s ** gamma`` with ``c**gamma`` taken on the principal branch.

    Requires a constant term ``c`` with positive real part; then
    ``s**gamma = c**gamma * exp(gamma * log(s / c))``.
    """
    c0 = s.constant_term
    if not c0.real > 0:
        raise DomainError(f"pow_real needs a constant term with positive real part, got {c0}")
    gamma = float(gamma)
    if gamma == 0.0:
        return TruncatedSeries.constant(1.0, s.dim, s.max_degree)
    unit = TruncatedSeries._wrap(s.basis, s.array / c0)
    body = exp_series(log_series(unit) * gamma)
    return body * cmath.exp(gamma * cmath.log(c0))


def compose(f: TruncatedSeries, g: "SeriesVector") -> TruncatedSeries:
    """Substitute the components of ``g`` for the variables of ``f``.

    ``f`` is treated as the polynomial it stores, so the result is exact
    through ``g.max_degree`` even when ``g`` has non-zero constant terms.
    (If ``f`` is itself the truncation of an infinite series and ``g(0) != 0``
    the result is the substituted truncation, not the Taylor series of the
    composite.)
    """
    if f.dim != g.codim:
        raise StructuralError(f"cannot substitute {g.codim} components into {f.dim} variables")
    fb = f.basis
    out_b = basis(g.dim, g.max_degree)
    fc = f.array
    nz = np.flatnonzero(fc)
    result = np.zeros(out_b.size, dtype=np.complex128)
    if nz.size == 0:
        return TruncatedSeries._wrap(out_b, result)
    top = int(fb.deg[nz].max())
    if not np.any([comp.constant_term != 0 for comp in g.components]):
        top = min(top, g.max_degree)
    count = int(fb.upto[top])
    comps = [comp.array for comp in g.components]
    powers = [None] * count
    one = np.zeros(out_b.size, dtype=np.complex128)
    one[0] = 1.0
    powers[0] = one
    result += fc[0] * one
    for k in range(1, count):
        prev = powers[fb.pred_index[k]]
        powers[k] = _kernels.cauchy_product(prev, comps[fb.pred_var[k]], out_b.ii, out_b.jj, out_b.kk, out_b.size)
        if fc[k] != 0:
            result += fc[k] * powers[k]
    return TruncatedSeries._wrap(out_b, result)


def _power_table(z: np.ndarray, n: int) -> np.ndarray:
    # (..., dim, n+1) with entry z_j ** e
    pw = np.empty(z.shape + (n + 1,), dtype=np.complex128)
    pw[..., 0] = 1.0
    for e in range(1, n + 1):
        pw[..., e] = pw[..., e - 1] * z
    return pw


def monomials(z, dim: int, max_degree: int) -> np.ndarray:
    """Values of every basis monomial at ``z``; shape ``(..., size)``."""
    z = np.asarray(z, dtype=np.complex128)
    if z.shape[-1] != dim:
        raise StructuralError(f"point of dimension {z.shape[-1]} for a series in {dim} variables")
    b = basis(dim, max_degree)
    pw = _power_table(z, max_degree)
    out = np.ones(z.shape[:-1] + (b.size,), dtype=np.complex128)
    for j in range(dim):
        out *= pw[..., j, b.exps[:, j]]
    return out


def evaluate(s: TruncatedSeries, z):
    """Evaluate the stored polynomial at one point ``(dim,)`` or a batch ``(..., dim)``."""
    vals = monomials(z, s.dim, s.max_degree) @ s.array
    return complex(vals) if np.ndim(vals) == 0 else vals


class SeriesVector:
    """A tuple of series in a common ring, representing a map ``C^dim -> C^codim``."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[TruncatedSeries]):
        components = tuple(components)
        if not components:
            raise StructuralError("a series vector needs at least one component")
        first = components[0]
        for comp in components[1:]:
            _check_match(first, comp)
        self.components = components

    @classmethod
    def identity(cls, dim: int, max_degree: int = DEFAULT_MAX_DEGREE) -> "SeriesVector":
        return cls([TruncatedSeries.variable(j, dim, max_degree) for j in range(dim)])

    @classmethod
    def from_matrix(cls, matrix, max_degree: int = DEFAULT_MAX_DEGREE, offset=None) -> "SeriesVector":
        """The affine map ``z -> offset + M z`` as a series vector."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.complex128))
        rows, dim = matrix.shape
        offset = np.zeros(rows, dtype=np.complex128) if offset is None else np.asarray(offset, dtype=np.complex128)
        b = basis(dim, max_degree)
        comps = []
        for r in range(rows):
            c = np.zeros(b.size, dtype=np.complex128)
            c[0] = offset[r]
            if max_degree >= 1:
                c[1 : 1 + dim] = matrix[r]
            comps.append(TruncatedSeries._wrap(b, c))
        return cls(comps)

    @property
    def codim(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def max_degree(self) -> int:
        return self.components[0].max_degree

    @property
    def constant(self) -> np.ndarray:
        return np.array([c.constant_term for c in self.components])

    def __len__(self) -> int:
        return self.codim

    def __getitem__(self, j: int) -> TruncatedSeries:
        return self.components[j]

    def __iter__(self):
        return iter(self.components)

    def __call__(self, z) -> np.ndarray:
        return eval_vector(self, z)

    def linear_part(self) -> np.ndarray:
        return linear_part(self)

    def __repr__(self) -> str:
        return f"SeriesVector(codim={self.codim}, dim={self.dim}, N={self.max_degree})"


def eval_vector(g: SeriesVector, z) -> np.ndarray:
    """Evaluate every component; result has shape ``(..., codim)``."""
    mons = monomials(z, g.dim, g.max_degree)
    coeffs = np.stack([c.array for c in g.components], axis=1)
    return mons @ coeffs


def linear_part(g: SeriesVector) -> np.ndarray:
    """Matrix ``M`` with ``M[j, k]`` the coefficient of ``z_k`` in component ``j``."""
    if g.max_degree < 1:
        return np.zeros((g.codim, g.dim), dtype=np.complex128)
    return np.stack([c.array[1 : 1 + g.dim] for c in g.components])


def inner_with(g: SeriesVector, a) -> TruncatedSeries:
    """The scalar series ``<g(z), a> = sum_j g_j(z) * conj(a_j)``."""
    a = np.asarray(a, dtype=np.complex128)
    if a.shape != (g.codim,):
        raise StructuralError(f"vector of length {a.shape} paired with {g.codim} components")
    acc = np.zeros(g.components[0].basis.size, dtype=np.complex128)
    for comp, aj in zip(g.components, a):
        acc += comp.array * np.conj(aj)
    return TruncatedSeries._wrap(g.components[0].basis, acc)
