"""Experiment configs: JSON records validated against ``configs/schema.json``."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .ballgeom import Automorphism, LinearMap
from .errors import StructuralError
from .mpseries import SeriesVector, TruncatedSeries
from .classify import SamplingConfig
from .sampling import make_rng, random_isometry, random_unimodular, random_unitary, sample_ball, sample_shell
from .spaces import (
    KernelSpace,
    custom_space,
    dirichlet_type_space,
    exponential_space,
    hgamma_space,
    power_space,
)
from .wco import (
    SymbolPair,
    automorphism_symbol,
    canonical_hgamma_symbol,
    custom_symbol,
    forced_symbol,
    unitary_const_symbol,
)

_RANDOM = re.compile(r"^random\(\s*(-?\d+)\s*\)$")


class ConfigError(StructuralError):
    """Config does not parse, validate or fit together."""


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("configs/schema.json").read_text())


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``"t41_hgamma.json"``."""
    path = Path(str(resources.files(__package__).joinpath("configs", name)))
    if not path.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return path


def validate(raw: dict) -> None:
    try:
        jsonschema.validate(raw, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None


# -- literal parsing ----------------------------------------------------------------------


def _random_seed(x) -> int | None:
    if isinstance(x, str):
        m = _RANDOM.match(x)
        if m:
            return int(m.group(1))
    return None


def parse_complex(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    raise ConfigError(f"not a complex literal: {x!r}")


def parse_vector(x, dim: int, radius: float = 0.9) -> np.ndarray:
    seed = _random_seed(x)
    if seed is not None:
        return sample_ball(make_rng(seed), 1, dim, radius)[0]
    v = np.array([parse_complex(c) for c in x], dtype=np.complex128)
    if v.shape != (dim,):
        raise ConfigError(f"expected a vector of length {dim}, got {v.shape[0]}")
    return v


def parse_matrix(x, rows: int, cols: int, unitary: bool = True) -> np.ndarray:
    seed = _random_seed(x)
    if seed is not None:
        rng = make_rng(seed)
        return random_unitary(rng, rows) if unitary and rows == cols else random_isometry(rng, rows, cols)
    m = np.array([[parse_complex(c) for c in row] for row in x], dtype=np.complex128)
    if m.shape != (rows, cols):
        raise ConfigError(f"expected a {rows}x{cols} matrix, got {m.shape}")
    return m


def parse_scalar(x) -> complex:
    seed = _random_seed(x)
    if seed is not None:
        return random_unimodular(make_rng(seed))
    return parse_complex(x)


def parse_series(terms, dim: int, max_degree: int) -> TruncatedSeries:
    coeffs = {}
    for t in terms:
        alpha = tuple(int(k) for k in t["alpha"])
        if len(alpha) != dim:
            raise ConfigError(f"multi-index {alpha} does not have length {dim}")
        if sum(alpha) > max_degree:
            raise ConfigError(f"multi-index {alpha} exceeds truncation order {max_degree}")
        coeffs[alpha] = coeffs.get(alpha, 0) + parse_complex(t["c"])
    return TruncatedSeries(dim, max_degree, coeffs=coeffs)


# -- descriptors ----------------------------------------------------------------------------


def parse_space(desc: dict) -> KernelSpace:
    fam = desc["family"]
    dim = int(desc["dim"])
    params = desc.get("params", {})
    if fam == "hgamma":
        if "gamma" not in params:
            raise ConfigError("hgamma space needs params.gamma")
        return hgamma_space(float(params["gamma"]), dim)
    if fam == "power":
        if "p" not in params:
            raise ConfigError("power space needs params.p")
        return power_space(float(params["p"]), dim)
    if fam == "dirichlet_type":
        return dirichlet_type_space(dim)
    if fam == "exponential":
        return exponential_space(dim)
    if "custom_coeffs" not in desc:
        raise ConfigError("custom space needs custom_coeffs")
    return custom_space(desc["custom_coeffs"], dim)


def parse_symbol(desc: dict, space: KernelSpace, max_degree: int) -> SymbolPair:
    d = space.dim
    kind = desc["kind"]
    mu = parse_scalar(desc.get("mu", 1))
    if kind == "canonical_hgamma":
        v = parse_matrix(desc["isometry"], d, d) if "isometry" in desc else np.eye(d)
        return canonical_hgamma_symbol(float(desc["gamma"]), parse_vector(desc["a"], d), mu, v, max_degree)
    if kind == "unitary_const":
        u = parse_matrix(desc["unitary"], d, d) if "unitary" in desc else np.eye(d)
        return unitary_const_symbol(mu, u, max_degree)
    if kind in ("automorphism", "forced"):
        u = parse_matrix(desc["unitary"], d, d) if "unitary" in desc else np.eye(d)
        phi = Automorphism(LinearMap(u), parse_vector(desc["a"], d))
        if kind == "automorphism":
            return automorphism_symbol(space, phi, mu, max_degree)
        return forced_symbol(space, phi, mu, max_degree)
    delta = parse_series(desc["delta_series"], d, max_degree)
    comps = [parse_series(c, d, max_degree) for c in desc["phi_series"]]
    if len(comps) != d:
        raise ConfigError(f"phi_series needs {d} components")
    return custom_symbol(delta, SeriesVector(comps))


@dataclass
class SymbolSpec:
    label: str
    expect: str
    descriptor: dict
    symbol: SymbolPair


@dataclass
class ExperimentConfig:
    raw: dict
    space: KernelSpace | None
    symbols: list = field(default_factory=list)
    rigidity_points: list = field(default_factory=list)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    expected_refutation: bool = False
    output_format: str | None = None
    output_path: str | None = None

    @property
    def default_expect(self) -> str:
        return "refute" if self.expected_refutation else "pass"


def load_config(source, seed: int | None = None) -> ExperimentConfig:
    """Parse a config from a path, a JSON string or an already decoded record.

    ``seed`` overrides ``sampling.seed``; when both are absent the
    ``RKHS_WCO_SEED`` environment variable and then the package default apply.
    """
    if isinstance(source, dict):
        raw = source
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    validate(raw)
    space = parse_space(raw["space"]) if "space" in raw else None
    if space is None and (raw.get("symbols") or raw.get("rigidity")):
        raise ConfigError("symbols and rigidity points need a space descriptor")
    samp = raw.get("sampling", {})
    tol = raw.get("tolerances", {})
    cfg = SamplingConfig(
        n_pairs=samp.get("n_pairs", 50),
        radius=samp.get("radius", 0.8),
        seed=seed if seed is not None else samp.get("seed"),
        max_degree=raw.get("truncation", SamplingConfig.max_degree),
        pass_tol=tol.get("pass", SamplingConfig.pass_tol),
        refute_tol=tol.get("refute", SamplingConfig.refute_tol),
        workers=samp.get("workers", 1),
    )
    exp = ExperimentConfig(raw, space, sampling=cfg, expected_refutation=raw.get("expected_refutation", False))
    for i, desc in enumerate(raw.get("symbols", [])):
        sym = parse_symbol(desc, space, cfg.max_degree)
        exp.symbols.append(SymbolSpec(desc.get("label", f"symbol {i}"), desc.get("expect", exp.default_expect), desc, sym))
    rig = raw.get("rigidity", {})
    exp.rigidity_points = [parse_vector(p, space.dim) for p in rig.get("points", [])]
    n_random = rig.get("n_random", 0)
    if n_random:
        lo, hi = rig.get("r_min", 0.3), rig.get("r_max", 0.7)
        if not lo <= hi:
            raise ConfigError("rigidity.r_min must not exceed r_max")
        rng = make_rng(cfg.resolved_seed)
        exp.rigidity_points += [sample_shell(rng, space.dim, lo, hi) for _ in range(n_random)]
    out = raw.get("output", {})
    exp.output_format = out.get("format")
    exp.output_path = out.get("path")
    return exp
