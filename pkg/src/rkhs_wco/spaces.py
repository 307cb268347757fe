"""Unitarily invariant kernel spaces on the unit ball.

A space is fixed by its dimension ``d`` and a coefficient sequence ``(a_n)``
with ``a_0 = 1``, ``a_1 > 0`` and ``a_n >= 0``; its kernel is
``K(z, w) = h(<z, w>)`` with ``h(t) = sum a_n t^n``.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, StructuralError, UnsupportedError
from .mpseries import MultiIndex, TruncatedSeries, basis, compose, inner_with, pow_real, SeriesVector


class Family(enum.Enum):
    HGAMMA = "hgamma"
    DIRICHLET_TYPE = "dirichlet_type"
    GENERALIZED_POWER = "power"
    EXPONENTIAL = "exponential"
    CUSTOM = "custom"


class CoefficientSequence:
    """Lazily generated, memoised kernel coefficients ``a_0, a_1, ...``.

    ``block(n)`` must return the first ``n`` coefficients as a float array.
    ``bounded_hint`` is ``True``/``False`` when the family knows analytically
    whether ``sum a_n`` converges, ``None`` otherwise.
    """

    def __init__(
        self,
        block: Callable[[int], np.ndarray],
        family: Family,
        params: dict | None = None,
        bounded_hint: bool | None = None,
        tail_estimate: Callable[[int], float] | None = None,
        label: str | None = None,
    ):
        self._block = block
        self.family = family
        self.params = dict(params or {})
        self.bounded_hint = bounded_hint
        self.tail_estimate = tail_estimate
        self.label = label or family.value
        self._cache = np.zeros(0)
        self._lock = threading.Lock()

    def get(self, n: int) -> np.ndarray:
        """First ``n`` coefficients (read-only array, possibly longer cache sliced)."""
        cache = self._cache
        if cache.shape[0] >= n:
            return cache[:n]
        with self._lock:
            if self._cache.shape[0] < n:
                size = max(n, 2 * self._cache.shape[0], 64)
                values = np.asarray(self._block(size), dtype=np.float64)
                if values.shape != (size,):
                    raise StructuralError("coefficient generator returned the wrong number of terms")
                _validate(values)
                values.setflags(write=False)
                self._cache = values
            return self._cache[:n]

    def __getitem__(self, n: int) -> float:
        return float(self.get(n + 1)[n])

    @property
    def tag(self) -> str:
        if self.family is Family.HGAMMA:
            return f"HGamma({self.params['gamma']:g})"
        return self.label

    def __repr__(self) -> str:
        return f"CoefficientSequence({self.tag})"


def _validate(values: np.ndarray) -> None:
    if values[0] != 1.0:
        raise DomainError(f"a_0 must equal 1, got {values[0]}")
    if values.shape[0] > 1 and not values[1] > 0:
        raise DomainError(f"a_1 must be positive, got {values[1]}")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise DomainError("kernel coefficients must be finite and non-negative")


@dataclass(frozen=True, eq=False)
class KernelSpace:
    """RKHS on ``B_dim`` with kernel ``sum a_n <z, w>^n``.

    Kernel values off the closed-form families are partial sums that stop once
    a term drops below ``eval_tol`` times the running sum, capped at
    ``eval_max_terms`` terms.  Arguments with ``|<z, w>| > max_abs_t`` are
    evaluated but flagged as not trustworthy.
    """

    dim: int
    coeffs: CoefficientSequence
    eval_max_terms: int = 10**6
    eval_tol: float = 1e-16
    max_abs_t: float = 0.95

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError("dimension must be a finite integer >= 1")
        if not self.eval_tol > 0:
            raise DomainError("eval_tol must be positive")

    @property
    def family(self) -> Family:
        return self.coeffs.family

    @property
    def gamma(self) -> float | None:
        return self.coeffs.params.get("gamma") if self.family is Family.HGAMMA else None

    def a(self, n: int) -> float:
        return self.coeffs[n]

    # -- the one-variable profile h ------------------------------------------

    def h(self, t) -> tuple[np.ndarray, np.ndarray]:
        """``h(t) = sum a_n t^n`` and an accuracy flag, elementwise."""
        t = np.asarray(t, dtype=np.complex128)
        shape = t.shape
        flat = t.reshape(-1)
        if self.family is Family.HGAMMA:
            if np.any(np.abs(flat) >= 1):
                raise DomainError("h(t) is only defined for |t| < 1")
            val = np.exp(-self.gamma * np.log(1.0 - flat))
            return val.reshape(shape), np.ones(shape, dtype=bool)
        val, ok = self.h_partial_sum(flat)
        return val.reshape(shape), ok.reshape(shape)

    def h_partial_sum(self, t, n_terms: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Partial sums of ``h`` (also available for closed-form families).

        With ``n_terms`` given, exactly that many coefficients are summed with
        no early stop; otherwise the adaptive stopping rule applies.
        """
        t = np.ascontiguousarray(np.asarray(t, dtype=np.complex128).reshape(-1))
        if n_terms is not None:
            coef = self.coeffs.get(n_terms)
            pw = t[:, None] ** np.arange(n_terms)
            return pw @ coef, np.ones(t.shape, dtype=bool)
        out = np.zeros(t.shape, dtype=np.complex128)
        ok = np.zeros(t.shape, dtype=bool)
        if t.size == 0:
            return out, ok
        todo = np.arange(t.size)
        m = float(np.max(np.abs(t)))
        if m >= 1:
            raise DomainError("h(t) is only defined for |t| < 1")
        length = 64 if m == 0 else int(min(self.eval_max_terms, 2 * math.log(self.eval_tol) / math.log(m) + 64))
        while True:
            coef = np.ascontiguousarray(self.coeffs.get(length))
            vals, _, done = _kernels.partial_sums(coef, t[todo], self.eval_tol)
            out[todo] = vals
            ok[todo] = done
            todo = todo[~done]
            if todo.size == 0 or length >= self.eval_max_terms:
                break
            length = min(2 * length, self.eval_max_terms)
        ok &= np.abs(t) <= self.max_abs_t
        return out, ok

    def h_taylor_at(self, t0: complex, order: int) -> np.ndarray:
        """Coefficients ``c_k`` of ``h(t0 + s) = sum_k c_k s^k`` for ``k <= order``."""
        t0 = complex(t0)
        if abs(t0) >= 1:
            raise DomainError("re-expansion point must satisfy |t0| < 1")
        k = np.arange(order + 1)
        if self.family is Family.HGAMMA:
            base = self.coeffs.get(order + 1)
            return base * np.exp((-self.gamma - k) * np.log(1.0 - t0))
        if t0 == 0:
            return self.coeffs.get(order + 1).astype(np.complex128)
        r = abs(t0)
        length = int(min(self.eval_max_terms, 2 * (math.log(self.eval_tol) - order) / math.log(r) + 64 + 4 * order))
        while True:
            coef = self.coeffs.get(length)
            n = np.arange(length)
            lf = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, length)))])
            logt = np.log(t0)
            nk = n[None, :] - k[:, None]
            valid = nk >= 0
            nk_safe = np.where(valid, nk, 0)
            logc = lf[n][None, :] - lf[k][:, None] - lf[nk_safe]
            terms = np.where(valid, coef[None, :] * np.exp(logc + nk_safe * logt), 0)
            c = terms.sum(axis=1)
            tail = np.abs(terms[:, -max(8, length // 16) :]).sum(axis=1)
            if np.all(tail <= 1e-17 * np.maximum(np.abs(c), 1e-300)) or length >= self.eval_max_terms:
                return c
            length = min(2 * length, self.eval_max_terms)

    # -- kernel ---------------------------------------------------------------

    def kernel(self, z, w) -> tuple[np.ndarray, np.ndarray]:
        """``K(z, w)`` with broadcasting over leading axes, plus accuracy flags."""
        z = check_ball(z, self.dim)
        w = check_ball(w, self.dim)
        t = np.sum(z * np.conj(w), axis=-1)
        return self.h(t)

    def kernel_series(self, g: SeriesVector, a) -> TruncatedSeries:
        """Taylor series of ``z -> K(g(z), a)`` given the series vector ``g``."""
        t = inner_with(g, a)
        if self.family is Family.HGAMMA:
            return pow_real(1.0 - t, -self.gamma)
        t0 = t.constant_term
        c = self.h_taylor_at(t0, t.max_degree)
        shift = SeriesVector([t - t0])
        uni = TruncatedSeries.from_array(1, t.max_degree, c)
        return compose(uni, shift)

    def __repr__(self) -> str:
        return f"KernelSpace(dim={self.dim}, {self.coeffs.tag})"


def check_ball(z, dim: int | None = None, strict: bool = True) -> np.ndarray:
    """Return ``z`` as a complex array, checking it lies in the open unit ball."""
    z = np.asarray(z, dtype=np.complex128)
    if z.ndim == 0:
        z = z.reshape(1)
    if dim is not None and z.shape[-1] != dim:
        raise StructuralError(f"point of dimension {z.shape[-1]}, expected {dim}")
    norms = np.linalg.norm(z, axis=-1)
    if strict and np.any(norms >= 1):
        raise DomainError(f"point outside the open unit ball (norm {np.max(norms):.17g})")
    return z


# -- families -------------------------------------------------------------------


def _hgamma_block(gamma: float):
    def block(n: int) -> np.ndarray:
        k = np.arange(n - 1, dtype=np.float64)
        ratios = (k + gamma) / (k + 1)
        return np.concatenate([[1.0], np.cumprod(ratios)])

    return block


def hgamma_space(gamma: float, dim: int, **kw) -> KernelSpace:
    """The space with kernel ``(1 - <z, w>)^(-gamma)``."""
    gamma = float(gamma)
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    seq = CoefficientSequence(_hgamma_block(gamma), Family.HGAMMA, {"gamma": gamma}, bounded_hint=False)
    return KernelSpace(dim, seq, **kw)


def power_space(p: float, dim: int, **kw) -> KernelSpace:
    """``a_n = (n + 1)^(-p)``; bounded kernel exactly when ``p > 1``."""
    p = float(p)

    def block(n: int) -> np.ndarray:
        return np.arange(1, n + 1, dtype=np.float64) ** (-p)

    tail = None
    if p > 1:
        # sum_{m > L} m^-p by the midpoint integral, error O(L^(-p-1))
        def tail(L: int) -> float:
            return (L + 0.5) ** (1 - p) / (p - 1)

    family = Family.DIRICHLET_TYPE if p == 1 else Family.GENERALIZED_POWER
    label = "DirichletType" if p == 1 else f"Power({p:g})"
    seq = CoefficientSequence(block, family, {"p": p}, bounded_hint=p > 1, tail_estimate=tail, label=label)
    return KernelSpace(dim, seq, **kw)


def dirichlet_type_space(dim: int, **kw) -> KernelSpace:
    """``a_n = 1/(n + 1)``, i.e. ``h(t) = -log(1 - t)/t``."""
    return power_space(1.0, dim, **kw)


def exponential_space(dim: int, **kw) -> KernelSpace:
    """``a_n = 1/n!``, kernel ``exp(<z, w>)`` (bounded, sup ``e``)."""

    def block(n: int) -> np.ndarray:
        lf = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, n, dtype=np.float64)))])
        return np.exp(-lf)

    seq = CoefficientSequence(block, Family.EXPONENTIAL, {}, bounded_hint=True, tail_estimate=lambda L: 0.0, label="Exponential")
    return KernelSpace(dim, seq, **kw)


def custom_space(coeffs: Sequence[float] | Callable[[int], np.ndarray], dim: int, **kw) -> KernelSpace:
    """Space from an explicit coefficient list (zero beyond it) or a block generator."""
    if callable(coeffs):
        seq = CoefficientSequence(coeffs, Family.CUSTOM, {}, bounded_hint=None, label="Custom")
    else:
        values = np.asarray(coeffs, dtype=np.float64)

        def block(n: int) -> np.ndarray:
            out = np.zeros(n)
            m = min(n, values.shape[0])
            out[:m] = values[:m]
            return out

        seq = CoefficientSequence(block, Family.CUSTOM, {"coeffs": values.tolist()}, bounded_hint=None, label="Custom")
    space = KernelSpace(dim, seq, **kw)
    seq.get(2)
    return space


# -- operations -------------------------------------------------------------------


def kernel_eval(space: KernelSpace, z, w):
    """``K(z, w)`` and its accuracy flag; scalars for single points."""
    val, ok = space.kernel(z, w)
    if np.ndim(val) == 0:
        return complex(val), bool(ok)
    if val.shape == (1,) and np.ndim(z) <= 1 and np.ndim(w) <= 1:
        return complex(val[0]), bool(ok[0])
    return val, ok


def monomial_norm_sq(space: KernelSpace, alpha: Sequence[int]) -> float:
    """``||z^alpha||^2 = alpha! / (a_|alpha| * |alpha|!)``."""
    alpha = MultiIndex(alpha)
    if len(alpha) != space.dim:
        raise StructuralError(f"multi-index {tuple(alpha)} does not match dimension {space.dim}")
    n = alpha.degree
    an = space.a(n)
    if an == 0:
        raise DomainError(f"z^{tuple(alpha)} is not in the space (a_{n} = 0)")
    return alpha.factorial() / (an * math.factorial(n))


def norm_sq(space: KernelSpace, f: TruncatedSeries) -> float:
    """Squared norm of a polynomial via orthogonality of monomials."""
    if f.dim != space.dim:
        raise StructuralError("polynomial and space have different dimensions")
    b = f.basis
    total = 0.0
    for k in np.flatnonzero(f.array):
        total += abs(f.array[k]) ** 2 * monomial_norm_sq(space, b.exps[k])
    return total


@dataclass(frozen=True)
class SupKernel:
    """``sup_z K(z, z) = sum a_n``: ``kind`` is finite, infinite or unknown."""

    kind: str
    value: float | None = None

    def __str__(self) -> str:
        if self.kind == "finite":
            return f"bounded, sup = {self.value:.7g}"
        return "unbounded" if self.kind == "infinite" else "boundedness unknown"


def sup_kernel_diagonal(space: KernelSpace, n_terms: int | None = None) -> SupKernel:
    seq = space.coeffs
    n_terms = n_terms or min(space.eval_max_terms, 10**6)
    if seq.bounded_hint is False:
        return SupKernel("infinite")
    if seq.bounded_hint is True:
        head = math.fsum(seq.get(n_terms))
        tail = seq.tail_estimate(n_terms) if seq.tail_estimate else 0.0
        return SupKernel("finite", head + tail)
    # no analytic knowledge: finite only if the sequence visibly terminates
    values = seq.get(n_terms)
    nz = np.flatnonzero(values)
    if nz[-1] < n_terms // 2:
        return SupKernel("finite", math.fsum(values))
    return SupKernel("unknown")


@dataclass(frozen=True)
class HGammaDetection:
    is_hgamma: bool
    gamma: float
    witness: int | None = None

    def __str__(self) -> str:
        if self.is_hgamma:
            return f"IsHGamma({self.gamma:g})"
        return f"NotHGamma(witness n={self.witness})"


def detect_hgamma(space: KernelSpace, n_check: int = 12, tol: float = 1e-10) -> HGammaDetection:
    """Compare ``a_n`` with the ``H_gamma`` coefficients for ``gamma = a_1``."""
    if n_check < 2:
        raise DomainError("n_check must be at least 2")
    a = space.coeffs.get(n_check + 1)
    gamma = float(a[1])
    ref = 1.0
    for n in range(1, n_check + 1):
        ref = ref * (n - 1 + gamma) / n
        scale = max(a[n], ref)
        if abs(a[n] - ref) > tol * scale:
            return HGammaDetection(False, gamma, n)
    return HGammaDetection(True, gamma)


def pointwise_bound_check(space: KernelSpace, f: TruncatedSeries, samples) -> float:
    """Largest value of ``|f(z)| - ||f|| K(z, z)^(1/2)`` over the samples."""
    samples = check_ball(samples, space.dim)
    nrm = math.sqrt(norm_sq(space, f))
    kzz, _ = space.kernel(samples, samples)
    vals = np.abs(f(samples)) - nrm * np.sqrt(kzz.real)
    return float(np.max(vals))


def gram_from_kernel_expansion(space: KernelSpace, max_degree: int) -> np.ndarray:
    """Gram matrix of the monomials, read off the expansion of the kernel.

    Expands ``sum_{n <= N} a_n <z, u>^n`` in ``2 * dim`` independent variables
    (``u`` standing for ``conj(w)``) with the series algebra; the coefficient
    matrix ``C`` satisfies ``K = m(z)^T C m(u)`` and the Gram matrix is
    ``C^{-1}`` (block diagonal by degree, so the finite inversion is exact).
    """
    d = space.dim
    N = max_degree
    t = sum(
        TruncatedSeries.variable(j, 2 * d, 2 * N) * TruncatedSeries.variable(d + j, 2 * d, 2 * N)
        for j in range(d)
    )
    acc = TruncatedSeries.constant(1.0, 2 * d, 2 * N)
    power = TruncatedSeries.constant(1.0, 2 * d, 2 * N)
    for n in range(1, N + 1):
        power = power * t
        acc = acc + power * space.a(n)
    small = basis(d, N)
    C = np.zeros((small.size, small.size), dtype=np.complex128)
    for i, alpha in enumerate(small.exps):
        for j, beta in enumerate(small.exps):
            C[i, j] = acc[tuple(alpha) + tuple(beta)]
    keep = np.array([space.a(int(n)) != 0 for n in small.deg])
    Ck = C[np.ix_(keep, keep)]
    return np.linalg.inv(Ck)
