"""Geometry of the unit ball: linear maps, the involutions ``phi_a`` and ``Aut(B_d)``.

Maps are :class:`HoloMap` objects.  Each can be evaluated at points (arrays of
shape ``(..., dim_in)``) and substituted into a :class:`SeriesVector`, which
gives the Taylor expansion of a composite without truncation error as long as
every factor is analytic at the relevant constant term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StructuralError
from .mpseries import DEFAULT_MAX_DEGREE, SeriesVector, TruncatedSeries, compose, inner_with, linear_part, reciprocal
from .spaces import check_ball

A_NORM_LIMIT = 1 - 1e-8


def inner(z, w) -> np.ndarray:
    """``<z, w> = sum_j z_j conj(w_j)`` over the last axis."""
    return np.sum(np.asarray(z) * np.conj(np.asarray(w)), axis=-1)


def operator_norm(m, iters: int = 100, tol: float = 1e-14) -> float:
    """Largest singular value by power iteration on ``M* M``."""
    m = np.atleast_2d(np.asarray(m, dtype=np.complex128))
    if not np.any(m):
        return 0.0
    gram = m.conj().T @ m
    x = np.ones(gram.shape[0], dtype=np.complex128) + 0.1j * np.arange(gram.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = gram @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        new = float(np.real(np.vdot(x, gram @ x)))
        if abs(new - lam) <= tol * max(new, 1.0):
            lam = new
            break
        lam = new
    return float(np.sqrt(max(lam, 0.0)))


def isometry_defect(m) -> float:
    """``max |M* M - I|`` entrywise."""
    m = np.atleast_2d(np.asarray(m, dtype=np.complex128))
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))


def nearest_unitary(m) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


class HoloMap:
    """Holomorphic map ``B_{dim_in} -> C^{dim_out}``."""

    dim_in: int
    dim_out: int

    def __call__(self, z) -> np.ndarray:
        raise NotImplementedError

    def on_series(self, g: SeriesVector) -> SeriesVector:
        """The map applied to a series vector (Taylor series of ``self o g``)."""
        raise NotImplementedError

    def taylor(self, max_degree: int = DEFAULT_MAX_DEGREE) -> SeriesVector:
        return self.on_series(SeriesVector.identity(self.dim_in, max_degree))

    def __matmul__(self, other: "HoloMap") -> "HoloMap":
        return ComposedMap(self, other)


class LinearMap(HoloMap):
    """``z -> M z`` for a ``dim_out x dim_in`` complex matrix."""

    def __init__(self, matrix):
        m = np.atleast_2d(np.asarray(matrix, dtype=np.complex128))
        m.setflags(write=False)
        self.matrix = m
        self.dim_out, self.dim_in = m.shape

    @classmethod
    def identity(cls, dim: int) -> "LinearMap":
        return cls(np.eye(dim))

    def __call__(self, z):
        return np.asarray(z, dtype=np.complex128) @ self.matrix.T

    def on_series(self, g):
        if g.codim != self.dim_in:
            raise StructuralError("series vector arity does not match the matrix")
        arrs = np.stack([c.array for c in g.components])
        out = self.matrix @ arrs
        return SeriesVector([TruncatedSeries._wrap(g.components[0].basis, row) for row in out])

    @property
    def adjoint(self) -> "LinearMap":
        return LinearMap(self.matrix.conj().T)

    def is_isometry(self, tol: float = 1e-12) -> bool:
        return isometry_defect(self.matrix) <= tol

    def is_unitary(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return m.shape[0] == m.shape[1] and self.is_isometry(tol) and isometry_defect(m.conj().T) <= tol

    def __repr__(self) -> str:
        return f"LinearMap({self.dim_out}x{self.dim_in})"


class MobiusInvolution(HoloMap):
    """The involution ``phi_a`` exchanging ``0`` and ``a``.

    ``phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>)`` with ``P_a`` the
    projection onto ``span(a)``, ``Q_a = I - P_a`` and
    ``s_a = sqrt(1 - |a|^2)``.  For ``a = 0`` this is ``-id``.
    """

    def __init__(self, a):
        a = np.asarray(a, dtype=np.complex128).reshape(-1)
        norm = float(np.linalg.norm(a))
        if norm >= A_NORM_LIMIT:
            raise DomainError(f"|a| = {norm:.17g} is too close to the sphere")
        a.setflags(write=False)
        self.a = a
        self.dim_in = self.dim_out = a.shape[0]
        self.norm_sq = norm * norm
        self.s = float(np.sqrt(1.0 - self.norm_sq))

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        za = inner(z, self.a)
        if self.norm_sq == 0:
            return -z
        pz = (za / self.norm_sq)[..., None] * self.a
        num = self.a - pz - self.s * (z - pz)
        return num / (1.0 - za)[..., None]

    def on_series(self, g):
        if g.codim != self.dim_in:
            raise StructuralError("series vector arity does not match phi_a")
        if self.norm_sq == 0:
            return SeriesVector([-c for c in g.components])
        ga = inner_with(g, self.a)
        inv_den = reciprocal(1.0 - ga)
        proj = ga / self.norm_sq
        comps = []
        for j, gj in enumerate(g.components):
            pj = proj * self.a[j]
            comps.append((self.a[j] - pj - self.s * (gj - pj)) * inv_den)
        return SeriesVector(comps)

    def __repr__(self) -> str:
        return f"MobiusInvolution(a={np.round(self.a, 6)})"


class ComposedMap(HoloMap):
    """``outer o inner``."""

    def __init__(self, outer: HoloMap, inner_map: HoloMap):
        if outer.dim_in != inner_map.dim_out:
            raise StructuralError("cannot compose maps of mismatched dimensions")
        self.outer = outer
        self.inner = inner_map
        self.dim_in = inner_map.dim_in
        self.dim_out = outer.dim_out

    def __call__(self, z):
        return self.outer(self.inner(z))

    def on_series(self, g):
        return self.outer.on_series(self.inner.on_series(g))

    def __repr__(self) -> str:
        return f"({self.outer!r} o {self.inner!r})"


class PolynomialMap(HoloMap):
    """Map given by a series vector read as an honest polynomial."""

    def __init__(self, poly: SeriesVector):
        self.poly = poly
        self.dim_in = poly.dim
        self.dim_out = poly.codim

    def __call__(self, z):
        return self.poly(z)

    def on_series(self, g):
        return SeriesVector([compose(c, g) for c in self.poly.components])


class Automorphism(HoloMap):
    """``z -> U phi_a(z)`` in normal form ``(U, a)``; ``a`` is ``phi^{-1}(0)``."""

    def __init__(self, u, a, tol: float = 1e-10):
        u = u if isinstance(u, LinearMap) else LinearMap(u)
        if not u.is_unitary(tol):
            raise DomainError("automorphism needs a unitary linear part")
        self.u = u
        self.phi_a = MobiusInvolution(a)
        if self.phi_a.dim_in != u.dim_in:
            raise StructuralError("unitary and translation point have different dimensions")
        self.dim_in = self.dim_out = u.dim_in

    @property
    def a(self) -> np.ndarray:
        return self.phi_a.a

    @classmethod
    def identity(cls, dim: int) -> "Automorphism":
        # phi_0 = -id, so the identity is (-I, 0)
        return cls(-np.eye(dim), np.zeros(dim))

    def __call__(self, z):
        return self.u(self.phi_a(z))

    def on_series(self, g):
        return self.u.on_series(self.phi_a.on_series(g))

    def inverse(self) -> "Automorphism":
        return auto_inverse(self)

    def compose(self, other: "Automorphism") -> "Automorphism":
        return auto_compose(self, other)

    def equals(self, other: "Automorphism", tol: float = 1e-10) -> bool:
        return bool(
            np.max(np.abs(self.u.matrix - other.u.matrix)) <= tol and np.max(np.abs(self.a - other.a)) <= tol
        )

    def __repr__(self) -> str:
        return f"Automorphism(a={np.round(self.a, 6)}, U={np.round(self.u.matrix, 6).tolist()})"


# -- operations ---------------------------------------------------------------------


def phi_a_eval(a, z) -> np.ndarray:
    return MobiusInvolution(a)(check_ball(z, len(np.atleast_1d(a))))


def phi_a_taylor(a, max_degree: int = DEFAULT_MAX_DEGREE) -> SeriesVector:
    return MobiusInvolution(a).taylor(max_degree)


def auto_eval(phi: Automorphism, z) -> np.ndarray:
    return phi(check_ball(z, phi.dim_in))


def _normal_form(psi: HoloMap, a) -> Automorphism:
    # psi o phi_a fixes 0 and is therefore a unitary; read it off from its linear part
    fixed = ComposedMap(psi, MobiusInvolution(a))
    u = linear_part(fixed.taylor(1))
    return Automorphism(nearest_unitary(u), a)


def auto_compose(phi1: Automorphism, phi2: Automorphism) -> Automorphism:
    """Normal form of ``phi1 o phi2``."""
    if phi1.dim_in != phi2.dim_in:
        raise StructuralError("automorphisms of balls of different dimension")
    # (phi1 o phi2)^{-1}(0) = phi2^{-1}(a1) = phi_{a2}(U2* a1)
    a = phi2.phi_a(phi2.u.adjoint(phi1.a))
    return _normal_form(ComposedMap(phi1, phi2), a)


def auto_inverse(phi: Automorphism) -> Automorphism:
    """``(U, a)^{-1} = phi_a o U* = (U*, U a)``."""
    return Automorphism(phi.u.adjoint.matrix, phi.u(phi.a))


def mobius_identity_residual(a, z, w) -> np.ndarray:
    """``|(1 - <phi_a z, phi_a w>) - (1-|a|^2)(1-<z,w>)/((1-<z,a>)(1-<a,w>))|``, batched."""
    a = np.asarray(a, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    if a.ndim == 1:
        phi = MobiusInvolution(a)
        fz, fw = phi(z), phi(w)
    else:
        fz = _phi_batch(a, z)
        fw = _phi_batch(a, w)
    lhs = 1.0 - inner(fz, fw)
    na = np.sum(np.abs(a) ** 2, axis=-1)
    rhs = (1.0 - na) * (1.0 - inner(z, w)) / ((1.0 - inner(z, a)) * (1.0 - inner(a, w)))
    return np.abs(lhs - rhs)


def _phi_batch(a, z):
    # phi_{a_i}(z_i) for stacked a
    na = np.sum(np.abs(a) ** 2, axis=-1)
    s = np.sqrt(1.0 - na)
    za = inner(z, a)
    safe = np.where(na > 0, na, 1.0)
    pz = np.where((na > 0)[..., None], (za / safe)[..., None] * a, 0)
    return (a - pz - s[..., None] * (z - pz)) / (1.0 - za)[..., None]


@dataclass(frozen=True)
class LinearityCheck:
    """Outcome of :func:`schwarz_linearity_check`.

    ``is_linear`` means ``V = Dg(0)`` is an isometry and the exact map agrees
    with ``V`` at every sample.  Otherwise ``witness`` holds the first failing
    sample (or ``None`` when the isometry test already failed).
    """

    is_linear: bool
    matrix: np.ndarray
    isometry_defect: float
    max_deviation: float
    witness: np.ndarray | None = None

    def __str__(self) -> str:
        if self.is_linear:
            return "Linear(V)"
        return f"NonLinear(isometry defect {self.isometry_defect:.3g}, deviation {self.max_deviation:.3g})"


def schwarz_linearity_check(g: SeriesVector, exact_eval, samples, tol: float = 1e-10) -> LinearityCheck:
    """Decide whether a self-map with ``g(0) = 0`` is a linear isometry.

    If ``V = Dg(0)`` is isometric, the Schwarz lemma forces ``g = V``; this
    tests both halves numerically.
    """
    if np.max(np.abs(g.constant)) > tol:
        raise DomainError("linearity check needs g(0) = 0")
    v = linear_part(g)
    defect = isometry_defect(v)
    samples = np.asarray(samples, dtype=np.complex128)
    dev = np.linalg.norm(exact_eval(samples) - samples @ v.T, axis=-1)
    worst = int(np.argmax(dev))
    max_dev = float(dev[worst])
    if defect > tol:
        return LinearityCheck(False, v, defect, max_dev, None)
    if max_dev >= tol:
        return LinearityCheck(False, v, defect, max_dev, samples[worst])
    return LinearityCheck(True, v, defect, max_dev)
