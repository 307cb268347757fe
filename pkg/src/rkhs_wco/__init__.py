"""Weighted composition operators on unitarily invariant kernel spaces of the unit ball.

Spaces, ball automorphisms and symbol pairs are built explicitly; co-isometry
and unitarity are decided from sampled kernel identities with three-valued
verdicts.
"""

from importlib.metadata import PackageNotFoundError, version as _version

from ._kernels import backend
from .ballgeom import (
    Automorphism,
    LinearMap,
    MobiusInvolution,
    auto_compose,
    auto_eval,
    auto_inverse,
    mobius_identity_residual,
    phi_a_eval,
    phi_a_taylor,
    schwarz_linearity_check,
)
from .classify import (
    SamplingConfig,
    Status,
    Verdict,
    bounded_kernel_maxmod_check,
    classify,
    recover_parameters,
    rigidity_report,
    theorem_suite,
)
from .errors import DomainError, RkhsWcoError, SingularityError, StructuralError, UnsupportedError, ZeroDenominator
from .mpseries import MultiIndex, SeriesVector, TruncatedSeries, compose, mul, pow_real, reciprocal
from .spaces import (
    KernelSpace,
    custom_space,
    detect_hgamma,
    dirichlet_type_space,
    exponential_space,
    hgamma_space,
    kernel_eval,
    monomial_norm_sq,
    power_space,
    sup_kernel_diagonal,
)
from .wco import (
    SymbolPair,
    adjoint_kernel_residual,
    apply,
    automorphism_symbol,
    canonical_hgamma_symbol,
    coisometry_residual,
    forced_delta,
    forced_symbol,
    matrix,
    product,
    unitary_const_symbol,
)

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.1.0"
