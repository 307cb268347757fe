"""Weighted composition operators ``W f = delta * (f o phi)``.

A :class:`SymbolPair` carries the multiplication symbol ``delta`` and the
composition symbol ``phi`` as exact evaluators together with their Taylor
expansions.  The residual oracles test the kernel identity

    K(z, w) = delta(z) * conj(delta(w)) * K(phi(z), phi(w)),

which holds at every pair of points exactly when ``W`` is a co-isometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .ballgeom import Automorphism, ComposedMap, HoloMap, LinearMap, MobiusInvolution, PolynomialMap
from .errors import DomainError, StructuralError, ZeroDenominator
from .mpseries import DEFAULT_MAX_DEGREE, SeriesVector, TruncatedSeries, compose, mul, reciprocal
from .spaces import KernelSpace, hgamma_space, monomial_norm_sq, basis


class HoloFunction:
    """Scalar holomorphic function on ``B_dim`` with a series substitution rule."""

    dim: int

    def __call__(self, z) -> np.ndarray:
        return self.eval_with_flag(z)[0]

    def eval_with_flag(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Values and a per-point flag saying the value is trustworthy."""
        raise NotImplementedError

    def on_series(self, g: SeriesVector) -> TruncatedSeries:
        raise NotImplementedError

    def taylor(self, max_degree: int = DEFAULT_MAX_DEGREE) -> TruncatedSeries:
        return self.on_series(SeriesVector.identity(self.dim, max_degree))


def _flags_like(values) -> np.ndarray:
    return np.ones(np.shape(values), dtype=bool)


class ConstantFunction(HoloFunction):
    def __init__(self, value: complex, dim: int):
        self.value = complex(value)
        self.dim = dim

    def eval_with_flag(self, z):
        z = np.asarray(z)
        vals = np.full(z.shape[:-1], self.value, dtype=np.complex128)
        return vals, _flags_like(vals)

    def on_series(self, g):
        return TruncatedSeries.constant(self.value, g.dim, g.max_degree)


class PolynomialFunction(HoloFunction):
    def __init__(self, poly: TruncatedSeries):
        self.poly = poly
        self.dim = poly.dim

    def eval_with_flag(self, z):
        vals = np.asarray(self.poly(np.asarray(z, dtype=np.complex128)))
        return vals, _flags_like(vals)

    def on_series(self, g):
        return compose(self.poly, g)


class KernelSection(HoloFunction):
    """``z -> scale * K(M(z), a)`` for a holomorphic map ``M`` (default: identity)."""

    def __init__(self, space: KernelSpace, a, inner_map: HoloMap | None = None, scale: complex = 1.0):
        self.space = space
        self.a = np.asarray(a, dtype=np.complex128).reshape(-1)
        self.inner_map = inner_map
        self.scale = complex(scale)
        self.dim = inner_map.dim_in if inner_map is not None else space.dim

    def eval_with_flag(self, z):
        z = np.asarray(z, dtype=np.complex128)
        x = self.inner_map(z) if self.inner_map is not None else z
        vals, ok = self.space.kernel(x, self.a)
        return self.scale * vals, ok

    def on_series(self, g):
        x = self.inner_map.on_series(g) if self.inner_map is not None else g
        return self.space.kernel_series(x, self.a) * self.scale


ZERO_TOL = 1e-12  # |K(phi(z), a)| below this counts as a kernel zero


class ForcedWeight(HoloFunction):
    """``z -> mu * K(a, a)^(1/2) / K(phi(z), a)`` with ``a = phi(0)``.

    Any co-isometric operator with composition symbol ``phi`` has exactly
    this multiplication symbol, for some unimodular ``mu``.
    """

    def __init__(self, space: KernelSpace, phi: HoloMap, mu: complex = 1.0):
        self.space = space
        self.phi = phi
        self.mu = complex(mu)
        self.dim = phi.dim_in
        self.a = np.asarray(phi(np.zeros(phi.dim_in, dtype=np.complex128)))
        kaa, _ = space.kernel(self.a, self.a)
        self.norm_a = float(np.sqrt(np.real(kaa)))

    def eval_with_flag(self, z):
        z = np.asarray(z, dtype=np.complex128)
        k, ok = self.space.kernel(self.phi(z), self.a)
        zero = np.abs(k) < ZERO_TOL
        if np.any(zero):
            idx = np.unravel_index(int(np.argmax(zero)), zero.shape)
            raise ZeroDenominator(z[idx], complex(k[idx]))
        return self.mu * self.norm_a / k, ok

    def on_series(self, g):
        k = self.space.kernel_series(self.phi.on_series(g), self.a)
        return reciprocal(k) * (self.mu * self.norm_a)


class ComposedWeight(HoloFunction):
    """``z -> outer(z) * inner(phi(z))``, the weight of a product of two operators."""

    def __init__(self, outer: HoloFunction, inner: HoloFunction, phi: HoloMap):
        self.outer = outer
        self.inner = inner
        self.phi = phi
        self.dim = outer.dim

    def eval_with_flag(self, z):
        z = np.asarray(z, dtype=np.complex128)
        v1, ok1 = self.outer.eval_with_flag(z)
        v2, ok2 = self.inner.eval_with_flag(self.phi(z))
        return v1 * v2, ok1 & ok2

    def on_series(self, g):
        return mul(self.outer.on_series(g), self.inner.on_series(self.phi.on_series(g)))


class ProductFunction(HoloFunction):
    """Pointwise product ``f * g``."""

    def __init__(self, f: HoloFunction, g: HoloFunction):
        if f.dim != g.dim:
            raise StructuralError("factors live on balls of different dimension")
        self.f = f
        self.g = g
        self.dim = f.dim

    def eval_with_flag(self, z):
        v1, ok1 = self.f.eval_with_flag(z)
        v2, ok2 = self.g.eval_with_flag(z)
        return v1 * v2, ok1 & ok2

    def on_series(self, g):
        return mul(self.f.on_series(g), self.g.on_series(g))


@dataclass(frozen=True, eq=False)
class SymbolPair:
    """``(delta, phi)`` with exact evaluators and lazily built series.

    ``provenance`` records how the pair was built, e.g.
    ``{"kind": "canonical", "gamma": 1.0, "a": ..., "mu": ..., "V": ...}``.
    """

    delta: HoloFunction
    phi: HoloMap
    provenance: dict = field(default_factory=lambda: {"kind": "custom"})
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self):
        if self.delta.dim != self.phi.dim_in or self.phi.dim_in != self.phi.dim_out:
            raise StructuralError("symbol pair must be a self-map of one ball with a matching weight")

    @property
    def dim(self) -> int:
        return self.phi.dim_in

    @property
    def kind(self) -> str:
        return self.provenance.get("kind", "custom")

    def delta_eval(self, z) -> np.ndarray:
        return self.delta(z)

    def phi_eval(self, z) -> np.ndarray:
        return self.phi(z)

    @cached_property
    def delta_series(self) -> TruncatedSeries:
        return self.delta.taylor(self.max_degree)

    @cached_property
    def phi_series(self) -> SeriesVector:
        return self.phi.taylor(self.max_degree)

    def with_degree(self, max_degree: int) -> "SymbolPair":
        return SymbolPair(self.delta, self.phi, self.provenance, max_degree)

    def series_errors(self, samples) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise ``|series - exact|`` for ``delta`` and for ``phi`` (norm)."""
        samples = np.asarray(samples, dtype=np.complex128)
        e_delta = np.abs(self.delta_series(samples) - self.delta(samples))
        e_phi = np.linalg.norm(self.phi_series(samples) - self.phi(samples), axis=-1)
        return e_delta, e_phi


# -- constructors -----------------------------------------------------------------


def _unimodular(mu: complex, tol: float = 1e-10) -> complex:
    mu = complex(mu)
    if abs(abs(mu) - 1) > tol:
        raise DomainError(f"|mu| must be 1, got {abs(mu)}")
    return mu


def canonical_hgamma_symbol(
    gamma: float, a, mu: complex = 1.0, v=None, max_degree: int = DEFAULT_MAX_DEGREE
) -> SymbolPair:
    """``phi = phi_a o V`` and ``delta(z) = mu K(Vz, a) / K(a, a)^(1/2)`` on ``H_gamma``.

    ``delta(z) = mu (1 - |a|^2)^(gamma/2) (1 - <Vz, a>)^(-gamma)``.
    """
    a = np.asarray(a, dtype=np.complex128).reshape(-1)
    d = a.shape[0]
    v = LinearMap(np.eye(d) if v is None else v)
    if v.dim_in != d or v.dim_out != d:
        raise StructuralError("V must be a square isometry on C^d")
    if not v.is_isometry(1e-10):
        raise DomainError("V is not an isometry")
    mu = _unimodular(mu)
    space = hgamma_space(gamma, d)
    involution = MobiusInvolution(a)
    scale = mu * (1.0 - involution.norm_sq) ** (gamma / 2)
    delta = KernelSection(space, a, inner_map=v, scale=scale)
    phi = ComposedMap(involution, v)
    prov = {"kind": "canonical", "gamma": float(gamma), "a": a, "mu": mu, "V": v.matrix}
    return SymbolPair(delta, phi, prov, max_degree)


def unitary_const_symbol(mu: complex, u, max_degree: int = DEFAULT_MAX_DEGREE) -> SymbolPair:
    """``delta = mu``, ``phi = U``: co-isometric on every unitarily invariant space."""
    u = u if isinstance(u, LinearMap) else LinearMap(u)
    if not u.is_isometry(1e-10):
        raise DomainError("U is not an isometry")
    mu = _unimodular(mu)
    prov = {"kind": "unitary_const", "mu": mu, "U": u.matrix}
    return SymbolPair(ConstantFunction(mu, u.dim_in), u, prov, max_degree)


def automorphism_symbol(
    space: KernelSpace, phi: Automorphism, mu: complex = 1.0, max_degree: int = DEFAULT_MAX_DEGREE
) -> SymbolPair:
    """``phi`` in ``Aut(B_d)`` with ``delta(z) = mu K(z, a) / K(a, a)^(1/2)``, ``a = phi^{-1}(0)``."""
    mu = _unimodular(mu)
    a = phi.a
    kaa, _ = space.kernel(a, a)
    delta = KernelSection(space, a, scale=mu / np.sqrt(np.real(kaa)))
    prov = {"kind": "automorphism", "mu": mu, "U": phi.u.matrix, "a": a}
    return SymbolPair(delta, phi, prov, max_degree)


def forced_symbol(space: KernelSpace, phi: HoloMap, mu: complex = 1.0, max_degree: int = DEFAULT_MAX_DEGREE) -> SymbolPair:
    """Pair ``phi`` with the only weight that could make it co-isometric on ``space``."""
    mu = _unimodular(mu)
    prov = {"kind": "forced", "mu": mu, "a": np.asarray(phi(np.zeros(phi.dim_in)))}
    return SymbolPair(ForcedWeight(space, phi, mu), phi, prov, max_degree)


def custom_symbol(delta: TruncatedSeries, phi: SeriesVector) -> SymbolPair:
    """Polynomial symbols given by their coefficients."""
    if delta.max_degree != phi.max_degree:
        raise StructuralError("delta and phi must share a truncation order")
    return SymbolPair(PolynomialFunction(delta), PolynomialMap(phi), {"kind": "custom"}, delta.max_degree)


def perturb_delta(w: SymbolPair, eps: float, coord: int = 0) -> SymbolPair:
    """Multiply ``delta`` by ``1 + eps * z_{coord+1}`` (negative control)."""
    factor = TruncatedSeries.constant(1.0, w.dim, w.max_degree) + eps * TruncatedSeries.variable(coord, w.dim, w.max_degree)
    prov = dict(w.provenance, perturbation=float(eps))
    return SymbolPair(ProductFunction(w.delta, PolynomialFunction(factor)), w.phi, prov, w.max_degree)


def forced_delta(space: KernelSpace, phi: HoloMap, mu: complex = 1.0) -> ForcedWeight:
    return ForcedWeight(space, phi, _unimodular(mu))


# -- operator algebra -----------------------------------------------------------------


def apply(w: SymbolPair, f: TruncatedSeries) -> TruncatedSeries:
    """``W f = delta * (f o phi)`` on a polynomial ``f`` through the truncation order."""
    if f.dim != w.dim:
        raise StructuralError("polynomial lives in a different dimension")
    return mul(w.delta_series, compose(f, w.phi_series))


def product(w2: SymbolPair, w1: SymbolPair) -> SymbolPair:
    """Symbols of ``W2 W1``: weight ``delta2 * (delta1 o phi2)``, map ``phi1 o phi2``."""
    if w1.dim != w2.dim:
        raise StructuralError("operators act on spaces over balls of different dimension")
    delta = ComposedWeight(w2.delta, w1.delta, w2.phi)
    phi = ComposedMap(w1.phi, w2.phi)
    prov = {"kind": "product", "factors": (w2.provenance, w1.provenance)}
    return SymbolPair(delta, phi, prov, min(w1.max_degree, w2.max_degree))


@dataclass(frozen=True)
class WcoMatrix:
    """Finite section of ``W`` in the orthonormal monomial basis ``z^alpha / ||z^alpha||``.

    ``entries[i, j]`` is the coefficient of ``e_{index[i]}`` in ``W e_{index[j]}``.
    """

    space: KernelSpace
    max_degree: int
    index: list
    degrees: np.ndarray
    entries: np.ndarray

    def block(self, max_degree: int) -> np.ndarray:
        keep = self.degrees <= max_degree
        return self.entries[np.ix_(keep, keep)]


def matrix(space: KernelSpace, w: SymbolPair, max_degree: int) -> WcoMatrix:
    if space.dim != w.dim:
        raise StructuralError("space and symbol dimensions differ")
    b = basis(space.dim, max_degree)
    keep = [k for k in range(b.size) if space.a(int(b.deg[k])) != 0]
    norms = np.ones(b.size)
    norms[keep] = [np.sqrt(monomial_norm_sq(space, b.exps[k])) for k in keep]
    wn = w.with_degree(max_degree)
    delta_s = wn.delta_series
    phi_s = wn.phi_series
    cols = []
    for k in keep:
        mono = TruncatedSeries.from_array(space.dim, max_degree, np.eye(b.size)[k])
        image = mul(delta_s, compose(mono, phi_s)).array
        cols.append(image[keep] * norms[keep] / norms[k])
    entries = np.stack(cols, axis=1)
    index = [tuple(int(x) for x in b.exps[k]) for k in keep]
    return WcoMatrix(space, max_degree, index, b.deg[keep], entries)


# -- residual oracles -------------------------------------------------------------------


@dataclass
class ResidualReport:
    """Per-pair relative residuals; ``nan`` marks pairs excluded for inaccurate kernels."""

    residuals: np.ndarray
    flagged: np.ndarray

    @property
    def n_flagged(self) -> int:
        return int(np.count_nonzero(self.flagged))

    @property
    def n_used(self) -> int:
        return int(self.residuals.size - self.n_flagged)

    @property
    def max(self) -> float:
        good = self.residuals[~self.flagged]
        return float(np.max(good)) if good.size else float("nan")

    @property
    def median(self) -> float:
        good = self.residuals[~self.flagged]
        return float(np.median(good)) if good.size else float("nan")

    @property
    def argmax(self) -> int | None:
        if self.n_used == 0:
            return None
        r = np.where(self.flagged, -np.inf, self.residuals)
        return int(np.argmax(r))


def _pairs(z, w, dim):
    z = np.atleast_2d(np.asarray(z, dtype=np.complex128))
    w = np.atleast_2d(np.asarray(w, dtype=np.complex128))
    if z.shape != w.shape or z.shape[-1] != dim:
        raise StructuralError("sample pairs must be two (n, dim) arrays")
    return z, w


def coisometry_residual(space: KernelSpace, w: SymbolPair, z, wpts) -> ResidualReport:
    """``|K(z,w) - delta(z) conj(delta(w)) K(phi z, phi w)| / (1 + |K(z,w)|)`` per pair."""
    z, wpts = _pairs(z, wpts, space.dim)
    kzw, ok0 = space.kernel(z, wpts)
    dz, ok1 = w.delta.eval_with_flag(z)
    dw, ok2 = w.delta.eval_with_flag(wpts)
    kphi, ok3 = space.kernel(w.phi(z), w.phi(wpts))
    res = np.abs(kzw - dz * np.conj(dw) * kphi) / (1.0 + np.abs(kzw))
    flagged = ~(ok0 & ok1 & ok2 & ok3) | ~np.isfinite(res)
    return ResidualReport(np.where(flagged, np.nan, res), flagged)


def adjoint_kernel_residual(space: KernelSpace, w: SymbolPair, z, wpts) -> ResidualReport:
    """The same identity through the Gram matrix of the vectors ``W* K_y``.

    ``W* K_y = conj(delta(y)) K_{phi(y)}``, so
    ``<W* K_{y2}, W* K_{y1}> = delta(y1) conj(delta(y2)) K(phi y1, phi y2)``;
    both Gram matrices are assembled over all sample points and compared at
    the requested pairs.
    """
    z, wpts = _pairs(z, wpts, space.dim)
    n = z.shape[0]
    ys = np.concatenate([z, wpts])
    coef, ok_c = w.delta.eval_with_flag(ys)
    coef = np.conj(coef)
    centers = w.phi(ys)
    k_img, ok_i = space.kernel(centers[:, None, :], centers[None, :, :])
    gram_img = np.conj(coef)[:, None] * coef[None, :] * k_img
    gram_src, ok_s = space.kernel(ys[:, None, :], ys[None, :, :])
    rows = np.arange(n)
    cols = n + rows
    target = gram_src[rows, cols]
    res = np.abs(gram_img[rows, cols] - target) / (1.0 + np.abs(target))
    flagged = ~(ok_c[rows] & ok_c[cols] & ok_i[rows, cols] & ok_s[rows, cols]) | ~np.isfinite(res)
    return ResidualReport(np.where(flagged, np.nan, res), flagged)


def kernel_ratio_residual(space: KernelSpace, phi: HoloMap, z, wpts) -> ResidualReport:
    """``|K(z,w) K(phi z, a) K(a, phi w) - K(phi z, phi w) K(a, a)|``, relative, with ``a = phi(0)``."""
    z, wpts = _pairs(z, wpts, space.dim)
    a = np.asarray(phi(np.zeros(space.dim, dtype=np.complex128)))
    fz, fw = phi(z), phi(wpts)
    kzw, ok0 = space.kernel(z, wpts)
    kza, ok1 = space.kernel(fz, a)
    kaw, ok2 = space.kernel(a, fw)
    kff, ok3 = space.kernel(fz, fw)
    kaa, _ = space.kernel(a, a)
    lhs = kzw * kza * kaw
    res = np.abs(lhs - kff * kaa) / (1.0 + np.abs(lhs))
    flagged = ~(ok0 & ok1 & ok2 & ok3)
    return ResidualReport(np.where(flagged, np.nan, res), flagged)
