"""Seeded random instances for checks and experiments.

Observables are made skew-adjoint by ``(M - M*)/2`` and then bosonic by
symmetrization; densities are ``G G* / Tr`` followed by symmetrization.  Every
generator takes a :class:`numpy.random.Generator` so that a single integer seed
fixes a whole suite.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .functional_algebra import PolynomialFunctional, trace_functional
from .grid import GridSpec, WaveFunction
from .hierarchy_algebra import Context, DensityHierarchy, Infinite, ObservableHierarchy
from .tensor_core import KOperator, Weights, check_side, random_matrix, sym_op, tensor_power

__all__ = [
    "rng_from",
    "spawn",
    "random_skew_bosonic",
    "random_self_adjoint_bosonic",
    "random_density",
    "random_observable_hierarchy",
    "random_density_hierarchy",
    "random_wave",
    "random_bosonic_wave",
    "random_functional",
]


def rng_from(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn(seed: int, count: int) -> list[np.random.Generator]:
    """Independent child generators derived from one integer seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def random_skew_bosonic(rng: np.random.Generator, k: int, dim: int, scale: float = 1.0) -> KOperator:
    side = check_side(dim, k)
    m = random_matrix(rng, side)
    op = sym_op(KOperator(k, dim, 0.5 * (m - m.conj().T)))
    return (scale / max(op.norm_max(), 1e-300)) * op


def random_self_adjoint_bosonic(rng: np.random.Generator, k: int, dim: int) -> KOperator:
    return 1j * random_skew_bosonic(rng, k, dim)


def random_density(rng: np.random.Generator, k: int, dim: int, weights: Weights | float = 1.0) -> KOperator:
    """Positive bosonic kernel with weighted trace one."""
    w = weights if isinstance(weights, Weights) else Weights(float(weights))
    side = check_side(dim, k)
    g = random_matrix(rng, side)
    op = sym_op(KOperator(k, dim, g @ g.conj().T))
    return op / (w.power(k) * np.trace(op.data).real)


def random_observable_hierarchy(
    rng: np.random.Generator,
    support: Iterable[int],
    dim: int,
    context: Context | None = None,
) -> ObservableHierarchy:
    entries = {k: random_skew_bosonic(rng, k, dim) for k in sorted(set(support))}
    return ObservableHierarchy(entries, context if context is not None else Infinite())


def random_density_hierarchy(
    rng: np.random.Generator, depth: int, dim: int, weights: Weights | float = 1.0
) -> DensityHierarchy:
    """Independent random density levels ``1..depth`` (not a consistent marginal family)."""
    w = weights if isinstance(weights, Weights) else Weights(float(weights))
    return DensityHierarchy({k: random_density(rng, k, dim, w) for k in range(1, depth + 1)}, w)


def random_wave(rng: np.random.Generator, grid: GridSpec, k: int = 1, normalize: bool = True) -> WaveFunction:
    size = grid.n**k
    v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    psi = WaveFunction(v, grid, k)
    return (1 / np.sqrt(psi.norm2())) * psi if normalize else psi


def random_bosonic_wave(rng: np.random.Generator, grid: GridSpec, k: int, terms: int = 3) -> WaveFunction:
    """Normalised sum of a few symmetric product states ``f^{⊗k}``."""
    total = np.zeros(grid.n**k, dtype=complex)
    for _ in range(terms):
        f = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
        total += tensor_power(f, k)
    psi = WaveFunction(total, grid, k)
    return (1 / np.sqrt(psi.norm2())) * psi


def random_functional(
    rng: np.random.Generator,
    dim: int,
    support: Iterable[int] = (1, 2),
    context: Context | None = None,
    degree: int = 2,
) -> PolynomialFunctional:
    """``a F1 + b F1 F2`` style polynomial in trace functionals (degree 1 or 2)."""
    support = tuple(support)
    gens = [random_observable_hierarchy(rng, support, dim, context) for _ in range(degree)]
    F = trace_functional(gens[0], float(rng.uniform(0.5, 1.5)))
    if degree >= 2:
        prod = trace_functional(gens[1], float(rng.uniform(0.5, 1.5)))
        for g in gens[2:]:
            prod = prod * trace_functional(g)
        F = F + prod * trace_functional(gens[0])
    return F
