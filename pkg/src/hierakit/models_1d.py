"""Concrete one-dimensional models on a periodic grid.

Contents:

* grid operators: spectral Laplacian, scaled pair potential ``V_N``, grid delta;
* the N-body Hamiltonian, the BBGKY and GP observable hierarchies, and the
  cubic NLS energy;
* the embeddings ``Phi -> |Phi><Phi|``, ``Psi -> (Tr_{k+1..N} Psi)_k`` and
  ``phi -> (|phi^{⊗k}><phi^{⊗k}|)_k``;
* right-hand sides of the BBGKY and GP hierarchies written directly from their
  kernel formulas (not through the hierarchy brackets), so that comparing them
  with the Hamiltonian vector fields is a genuine two-route check.

Conventions: observables are matrices acting on grid values; density matrices
are stored as kernels; traces carry ``h`` per traced particle.  The grid delta
is ``1/h`` on coincident points so that ``Tr_2(delta gamma^(2))`` reproduces
the kernel ``gamma(x, x; x', x)`` exactly.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .functional_algebra import PolynomialFunctional, trace_functional
from .grid import GridSpec, WaveFunction
from .hierarchy_algebra import (
    DensityHierarchy,
    FiniteN,
    HierarchyDepthError,
    Infinite,
    ObservableHierarchy,
)
from .tensor_core import KOperator, check_side, partial_trace

__all__ = [
    "GridSpec",
    "WaveFunction",
    "ModelParams",
    "bump",
    "profile_V",
    "laplacian",
    "apply_laplacian",
    "potential_VN",
    "pair_potential_values",
    "delta2_grid",
    "delta_pairing_gap",
    "hamiltonian_N",
    "w_bbgky",
    "h_bbgky",
    "w_gp",
    "h_gp",
    "iota_dm",
    "iota_rdm",
    "iota_fact",
    "h_nls",
    "nls_rhs",
    "bbgky_rhs",
    "gp_rhs",
    "factorized_closure",
]


def bump(x: np.ndarray) -> np.ndarray:
    """Smooth compactly supported bump ``exp(-1/(1-x^2))`` on ``|x| < 1``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the 1-D Bose gas.

    Parameters
    ----------
    grid : GridSpec
    N : int
        Particle number.
    kappa : float
        Coupling sign, ``+1`` (defocusing) or ``-1`` (focusing).
    beta : float
        Interaction scaling exponent in ``(0, 1)``: ``V_N(x) = N^beta V(N^beta x)``.
    K : int
        Depth used for truncated infinite hierarchies.
    width : float, optional
        Half-width of the unscaled bump profile; defaults to ``L / 4``.
    """

    grid: GridSpec
    N: int = 2
    kappa: float = 1.0
    beta: float = 0.5
    K: int = 3
    width: float | None = field(default=None)

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.kappa not in (1, -1, 1.0, -1.0):
            raise ValueError("kappa must be +1 or -1")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.width is None:
            object.__setattr__(self, "width", self.grid.L / 4)
        if not 0 < self.width <= self.grid.L / 2:
            raise ValueError("bump width must lie in (0, L/2]")
        scaled = self.width / self.scale
        if scaled < 2 * self.grid.h:
            warnings.warn(
                f"scaled interaction width {scaled:.3g} is below two grid spacings ({2 * self.grid.h:.3g})",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def scale(self) -> float:
        return float(self.N) ** self.beta


def _profile_constant(params: ModelParams) -> float:
    g = params.grid
    x = g.periodic_difference(g.x, 0.0)
    mass = g.h * bump(x / params.width).sum()
    return 1.0 / mass


def profile_V(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Unscaled profile ``V``, normalised so that ``sum_m h V(x_m) = 1`` on the grid."""
    return _profile_constant(params) * bump(np.asarray(x) / params.width)


def pair_potential_values(params: ModelParams, scale: float | None = None) -> np.ndarray:
    """Matrix ``V_N(x_i - x_j)`` with the periodic distance.

    ``V_N(x) = s V(s x)`` with ``s = N**beta``, then rescaled so that every row
    has unit discrete integral ``sum_j h V_N(x_i - x_j) = 1``.  The correction
    is the quadrature error of the narrowed bump (below 1e-5 once the scaled
    half-width spans twenty grid points).
    """
    g = params.grid
    s = params.scale if scale is None else scale
    diff = g.periodic_difference(g.x[:, None], g.x[None, :])
    values = bump(s * diff / params.width)
    return values / (g.h * values[0].sum())


def laplacian(grid: GridSpec) -> KOperator:
    """Fourier-spectral second derivative ``Delta`` as a real symmetric matrix."""
    n = grid.n
    symbol = -(grid.wavenumbers**2)
    mat = np.fft.ifft(symbol[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
    mat = 0.5 * (mat + mat.conj().T)
    return KOperator(1, n, mat.real.astype(complex))


def apply_laplacian(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.fft.ifft(-(grid.wavenumbers**2) * np.fft.fft(values))


def potential_VN(params: ModelParams) -> KOperator:
    """Two-particle multiplication operator ``V_N(X_1 - X_2)``."""
    n = params.grid.n
    return KOperator(2, n, np.diag(pair_potential_values(params).ravel()).astype(complex))


def delta2_grid(grid: GridSpec) -> KOperator:
    """Grid delta ``delta(X_1 - X_2)``: ``1/h`` where ``x_1 = x_2``, zero elsewhere."""
    n = grid.n
    diag = (np.eye(n) / grid.h).ravel()
    return KOperator(2, n, np.diag(diag).astype(complex))


def delta_pairing_gap(phi: WaveFunction, params: ModelParams) -> float:
    """``|Tr(V_N gamma) - Tr(delta gamma)|`` for the product state ``gamma = |phi⊗phi><phi⊗phi|``.

    Both operators are diagonal, so the pairings reduce to
    ``h^2 sum_ij V_N(x_i - x_j) |phi_i|^2 |phi_j|^2`` and ``h sum_i |phi_i|^4``."""
    if phi.grid != params.grid:
        raise ValueError("wave function and model live on different grids")
    h = params.grid.h
    dens = np.abs(phi.values) ** 2
    smeared = h**2 * dens @ pair_potential_values(params) @ dens
    return float(abs(smeared - h * np.sum(dens**2)))


def _configuration_potential(params: ModelParams, k: int) -> np.ndarray:
    """``sum_{i<j<=k} V_N(x_i - x_j)`` on every k-particle configuration (flattened)."""
    n = params.grid.n
    vpair = pair_potential_values(params)
    total = np.zeros((n,) * k)
    for i, j in itertools.combinations(range(k), 2):
        shape = [1] * k
        shape[i], shape[j] = n, n
        total = total + vpair.reshape(shape)
    return total.ravel()


def _kinetic_sum(grid: GridSpec, k: int) -> np.ndarray:
    """``sum_j (-Delta_{x_j})`` as an ``n**k`` square matrix."""
    n = grid.n
    minus_lap = -laplacian(grid).data
    total = np.zeros((n**k, n**k), dtype=complex)
    for j in range(k):
        total += np.kron(np.kron(np.eye(n**j), minus_lap), np.eye(n ** (k - j - 1)))
    return total


def hamiltonian_N(params: ModelParams) -> KOperator:
    """``sum_j (-Delta_j) + (2 kappa / (N-1)) sum_{i<j} V_N(X_i - X_j)``."""
    N, g = params.N, params.grid
    check_side(g.n, N)
    H = _kinetic_sum(g, N)
    if N > 1:
        H = H + np.diag(2 * params.kappa / (N - 1) * _configuration_potential(params, N))
    return KOperator(N, g.n, H)


def w_bbgky(params: ModelParams) -> ObservableHierarchy:
    """Observable 2-hierarchy ``-i (-Delta, kappa V_N)``."""
    minus_lap = -1.0 * laplacian(params.grid)
    entries = {1: -1j * minus_lap}
    if params.N >= 2:
        entries[2] = (-1j * params.kappa) * potential_VN(params)
    return ObservableHierarchy(entries, FiniteN(params.N))


def h_bbgky(params: ModelParams) -> PolynomialFunctional:
    """``Gamma -> Tr(-Delta gamma^(1)) + kappa Tr(V_N gamma^(2))``."""
    return trace_functional(w_bbgky(params))


def w_gp(grid: GridSpec, kappa: float = 1.0) -> ObservableHierarchy:
    """Observable hierarchy ``-i (-Delta, kappa delta(X_1 - X_2))``."""
    minus_lap = -1.0 * laplacian(grid)
    return ObservableHierarchy({1: -1j * minus_lap, 2: (-1j * kappa) * delta2_grid(grid)}, Infinite())


def h_gp(grid: GridSpec, kappa: float = 1.0) -> PolynomialFunctional:
    """``Gamma -> Tr(-Delta gamma^(1)) + kappa Tr(delta gamma^(2))``."""
    return trace_functional(w_gp(grid, kappa))


# -- embeddings -------------------------------------------------------------------
def iota_dm(Phi: WaveFunction) -> KOperator:
    """Kernel ``Phi(x) conj(Phi(x'))`` of ``|Phi><Phi|``."""
    return KOperator.outer(Phi.values, Phi.values, Phi.k, Phi.grid.n)


def iota_rdm(Psi: KOperator, N: int | None = None, grid: GridSpec | None = None) -> DensityHierarchy:
    """Reduced density matrices ``(Tr_{k+1..N} Psi)_{k=1..N}`` (not normalised)."""
    N = Psi.k if N is None else N
    if N != Psi.k:
        raise ValueError(f"operator has {Psi.k} particles, expected {N}")
    w = grid.weights if grid is not None else 1.0
    entries = {k: partial_trace(Psi, k, w) for k in range(1, N + 1)}
    return DensityHierarchy(entries, w if grid is not None else 1.0, validate=False)


def iota_fact(phi: WaveFunction, K: int) -> DensityHierarchy:
    """``(|phi^{⊗k}><phi^{⊗k}|)_{k=1..K}``."""
    return DensityHierarchy.factorized(phi.values, K, phi.grid.weights)


# -- NLS -----------------------------------------------------------------------------
def h_nls(phi: WaveFunction, kappa: float = 1.0) -> float:
    """``sum_m h (|phi'(x_m)|^2 + kappa |phi(x_m)|^4)`` with the spectral derivative."""
    g = phi.grid
    grad = np.fft.ifft(1j * g.wavenumbers * np.fft.fft(phi.values))
    dens = np.abs(phi.values) ** 2
    return float(g.h * np.sum(np.abs(grad) ** 2 + kappa * dens**2))


def nls_rhs(phi: WaveFunction, kappa: float = 1.0) -> WaveFunction:
    """``-i(-Delta phi + 2 kappa |phi|^2 phi)``; also the symplectic gradient of :func:`h_nls`."""
    v = phi.values
    return WaveFunction(-1j * (-apply_laplacian(v, phi.grid) + 2 * kappa * np.abs(v) ** 2 * v), phi.grid)


# -- hierarchy right-hand sides ---------------------------------------------------------
def _apply_on_axis(tensor: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    moved = np.tensordot(matrix, tensor, axes=([1], [axis]))
    return np.moveaxis(moved, 0, axis)


def _kinetic_commutator(gamma: np.ndarray, grid: GridSpec, k: int) -> np.ndarray:
    """Kernel of ``[-Delta_{x_1..x_k}, gamma]``."""
    n = grid.n
    lap = laplacian(grid).data
    T = gamma.reshape((n,) * (2 * k))
    out = np.zeros_like(T)
    for a in range(k):
        out -= _apply_on_axis(T, lap, a)  # -Delta acting on the row variable
        out += _apply_on_axis(T, lap.T, k + a)  # gamma (-Delta) with a minus sign
    return out.reshape(n**k, n**k)


def bbgky_rhs(gamma: DensityHierarchy, params: ModelParams) -> DensityHierarchy:
    """Time derivative of the reduced density matrices under the N-body dynamics.

    ``d/dt gamma^(k) = -i( [-Delta_k, gamma^(k)]
    + 2 kappa/(N-1) sum_{i<j<=k} [V_N(X_i - X_j), gamma^(k)]
    + 2 kappa (N-k)/(N-1) sum_{i<=k} Tr_{k+1} [V_N(X_i - X_{k+1}), gamma^(k+1)] )``,
    the last line being absent for ``k = N``.
    """
    N, g, kappa = params.N, params.grid, params.kappa
    missing = [k for k in range(1, N + 1) if k not in gamma]
    if missing:
        raise HierarchyDepthError(f"BBGKY needs levels 1..{N}; missing {missing}")
    n, h = g.n, g.h
    vpair = pair_potential_values(params) if N > 1 else None
    out: dict[int, KOperator] = {}
    for k in range(1, N + 1):
        gk = gamma[k].data
        total = _kinetic_commutator(gk, g, k)
        if N > 1 and k >= 2:
            conf = _configuration_potential(params, k)
            total = total + 2 * kappa / (N - 1) * (conf[:, None] - conf[None, :]) * gk
        if k < N:
            T = gamma[k + 1].data.reshape(n**k, n, n**k, n)
            # gamma(x, y; x', y) for every y
            diag = np.einsum("ayby->aby", T)
            rows = np.arange(n**k)
            coords = np.array(np.unravel_index(rows, (n,) * k)) if k > 0 else None
            coll = np.zeros((n**k, n**k), dtype=complex)
            for i in range(k):
                vx = vpair[coords[i]]  # V_N(x_i - y), shape (n**k, n)
                coll += h * (np.einsum("ay,aby->ab", vx, diag) - np.einsum("by,aby->ab", vx, diag))
            total = total + 2 * kappa * (N - k) / (N - 1) * coll
        out[k] = KOperator(k, n, -1j * total)
    return DensityHierarchy(out, g.weights, validate=False)


def _contraction_plus_minus(gamma_next: np.ndarray, n: int, k: int) -> np.ndarray:
    """``sum_alpha (B+_{alpha;k+1} - B-_{alpha;k+1}) gamma^(k+1)`` by kernel evaluation."""
    T = gamma_next.reshape((n,) * (2 * (k + 1)))
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows, cols = letters[:k], letters[k : 2 * k].upper()
    out = np.zeros((n,) * (2 * k), dtype=complex)
    for alpha in range(k):
        r = rows[alpha]
        c = cols[alpha]
        plus = f"{rows}{r}{cols}{r}->{rows}{cols}"  # gamma(x, x_a; x', x_a)
        minus = f"{rows}{c}{cols}{c}->{rows}{cols}"  # gamma(x, x'_a; x', x'_a)
        out += np.einsum(plus, T) - np.einsum(minus, T)
    return out.reshape(n**k, n**k)


def factorized_closure(gamma: DensityHierarchy, level: int) -> KOperator:
    """Top component ``|phi^{⊗level}><phi^{⊗level}|`` reconstructed from rank-one ``gamma^(1)``."""
    g1 = gamma[1].data
    vals, vecs = np.linalg.eigh(0.5 * (g1 + g1.conj().T))
    phi = math.sqrt(max(vals[-1], 0.0)) * vecs[:, -1]
    return DensityHierarchy.factorized(phi, level, gamma.weights)[level]


def gp_rhs(
    gamma: DensityHierarchy,
    grid: GridSpec,
    kappa: float = 1.0,
    K: int | None = None,
    closure: Callable[[DensityHierarchy, int], KOperator] | None = None,
) -> DensityHierarchy:
    """``d/dt gamma^(k) = -i([-Delta_k, gamma^(k)] + 2 kappa B_{k+1} gamma^(k+1))`` for ``k = 1..K``.

    The top level needs ``gamma^(K+1)``; when it is absent the ``closure``
    supplies it (for instance :func:`factorized_closure`), otherwise a
    :class:`HierarchyDepthError` is raised.
    """
    K = gamma.depth if K is None else K
    n = grid.n
    out: dict[int, KOperator] = {}
    for k in range(1, K + 1):
        if k not in gamma:
            raise HierarchyDepthError(f"GP right-hand side needs gamma^({k})")
        if k + 1 in gamma:
            nxt = gamma[k + 1]
        elif closure is not None:
            nxt = closure(gamma, k + 1)
        else:
            raise HierarchyDepthError(
                f"hierarchy depth exhausted: gamma^({k + 1}) missing and no closure supplied"
            )
        total = _kinetic_commutator(gamma[k].data, grid, k) + 2 * kappa * _contraction_plus_minus(nxt.data, n, k)
        out[k] = KOperator(k, n, -1j * total)
    return DensityHierarchy(out, grid.weights, validate=False)
