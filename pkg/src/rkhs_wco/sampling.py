"""Seeded random draws: ball points, Haar unitaries, unimodular scalars.

All randomness flows through ``numpy.random.Generator`` with the PCG64 bit
generator seeded by ``numpy.random.SeedSequence``.  Instance ``i`` of a
battery seeded with ``seed`` uses ``SeedSequence(seed).spawn(n)[i]``, so a
run is reproducible regardless of how instances are scheduled.
"""

from __future__ import annotations

import os

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence(seed).spawn"
SEED_ENV_VAR = "RKHS_WCO_SEED"
DEFAULT_SEED = 20240607


def resolve_seed(seed: int | None = None) -> int:
    """Explicit seed, else ``$RKHS_WCO_SEED``, else the package default."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env not in (None, ""):
        return int(env)
    return DEFAULT_SEED


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64(ss))


def instance_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [make_rng(child) for child in np.random.SeedSequence(int(seed)).spawn(n)]


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def sample_ball(rng: np.random.Generator, n: int, dim: int, radius: float = 0.8) -> np.ndarray:
    """``n`` points uniform (by volume) in the ball of the given radius in ``C^dim``."""
    v = complex_normal(rng, (n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / (2 * dim))
    return v * r[:, None]


def sample_shell(rng: np.random.Generator, dim: int, r_min: float, r_max: float) -> np.ndarray:
    """One point with uniformly random direction and norm in ``[r_min, r_max]``."""
    v = complex_normal(rng, dim)
    v /= np.linalg.norm(v)
    return v * rng.uniform(r_min, r_max)


def sample_sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    v = complex_normal(rng, (n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-distributed unitary (QR of a complex Ginibre matrix, phases fixed)."""
    q, r = np.linalg.qr(complex_normal(rng, (dim, dim)))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph[None, :]


def random_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """``rows x cols`` matrix with orthonormal columns."""
    q, r = np.linalg.qr(complex_normal(rng, (rows, cols)))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph[None, :]


def random_unimodular(rng: np.random.Generator) -> complex:
    return complex(np.exp(2j * np.pi * rng.random()))
