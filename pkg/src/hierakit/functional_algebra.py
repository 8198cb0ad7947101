"""Polynomial trace functionals, their derivatives, and symplectic gradients.

A :class:`PolynomialFunctional` is a real linear combination of products of
trace functionals ``Gamma -> i Tr(A . Gamma)`` (plus constants).  Its Gateaux
derivative at ``Gamma`` is again an observable hierarchy, obtained exactly by
the Leibniz rule; finite differences are used only to test it.

On one-particle wave functions the symplectic form is
``omega(f, g) = 2 Im <f, g>`` with the weighted inner product, and the
symplectic gradient of ``f`` is the vector ``X`` with ``df(v) = omega(X, v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import GridSpec, WaveFunction
from .hierarchy_algebra import (
    Context,
    DensityHierarchy,
    FiniteN,
    Infinite,
    ObservableHierarchy,
    OperatorAlgebra,
    dot_trace,
    dot_trace_complex,
    iota_epsilon,
)
from .tensor_core import KOperator, tensor_power

__all__ = [
    "PolynomialFunctional",
    "trace_functional",
    "constant",
    "evaluate",
    "gateaux_derivative",
    "SymplecticForm",
    "omega",
    "pb_L2",
    "symplectic_gradient_pullback",
    "symplectic_gradient_dm",
    "iota_dm_hierarchy",
    "GradientReport",
    "relative_deviation",
    "check_gateaux",
    "check_symplectic_gradient",
]

Monomial = tuple[float, tuple[ObservableHierarchy, ...]]


@dataclass(frozen=True, eq=False)
class PolynomialFunctional:
    """Real polynomial in trace functionals ``i Tr(A_b . Gamma)``.

    Parameters
    ----------
    monomials : sequence of (coefficient, generators)
        Each monomial contributes ``coefficient * prod_b i Tr(A_b . Gamma)``;
        an empty generator tuple is a constant.
    context : FiniteN, Infinite or OperatorAlgebra
        Lie structure used for Poisson brackets of this functional.
    """

    monomials: tuple[Monomial, ...] = ()
    context: Context = field(default_factory=Infinite)

    def __post_init__(self) -> None:
        clean = tuple((float(c), tuple(gens)) for c, gens in self.monomials)
        object.__setattr__(self, "monomials", clean)
        for _, gens in clean:
            for g in gens:
                if g.context != self.context:
                    raise ValueError(f"generator context {g.context} differs from {self.context}")

    # -- algebra ---------------------------------------------------------------
    def _merge(self, other: "PolynomialFunctional") -> Context:
        if self.context != other.context:
            raise ValueError("cannot combine functionals from different contexts")
        return self.context

    def __add__(self, other: "PolynomialFunctional | float") -> "PolynomialFunctional":
        if not isinstance(other, PolynomialFunctional):
            other = constant(float(other), self.context)
        return PolynomialFunctional(self.monomials + other.monomials, self._merge(other))

    __radd__ = __add__

    def __neg__(self) -> "PolynomialFunctional":
        return -1.0 * self

    def __sub__(self, other: "PolynomialFunctional | float") -> "PolynomialFunctional":
        return self + (-other if isinstance(other, PolynomialFunctional) else -float(other))

    def __mul__(self, other: "PolynomialFunctional | float") -> "PolynomialFunctional":
        if isinstance(other, PolynomialFunctional):
            ctx = self._merge(other)
            prods = tuple(
                (c1 * c2, g1 + g2) for c1, g1 in self.monomials for c2, g2 in other.monomials
            )
            return PolynomialFunctional(prods, ctx)
        return PolynomialFunctional(tuple((float(other) * c, g) for c, g in self.monomials), self.context)

    __rmul__ = __mul__

    def __pow__(self, power: int) -> "PolynomialFunctional":
        if power < 0:
            raise ValueError("only non-negative integer powers are polynomial")
        out = constant(1.0, self.context)
        for _ in range(power):
            out = out * self
        return out

    # -- structure -------------------------------------------------------------
    @property
    def generators(self) -> list[ObservableHierarchy]:
        return [g for _, gens in self.monomials for g in gens]

    @property
    def depth(self) -> int:
        """Highest particle level any generator touches."""
        return max((g.depth for g in self.generators), default=0)

    def evaluate_complex(self, gamma: DensityHierarchy) -> complex:
        total = 0j
        for c, gens in self.monomials:
            term = complex(c)
            for g in gens:
                term *= dot_trace_complex(g, gamma)
            total += term
        return total

    def __call__(self, gamma: DensityHierarchy) -> float:
        return self.evaluate_complex(gamma).real

    def derivative(self, gamma: DensityHierarchy) -> ObservableHierarchy:
        """Gateaux derivative at ``gamma`` by the Leibniz rule."""
        acc = ObservableHierarchy({}, self.context, validate=False)
        for c, gens in self.monomials:
            if not gens:
                continue
            values = [dot_trace(g, gamma) for g in gens]
            for b, g in enumerate(gens):
                others = math.prod(v for i, v in enumerate(values) if i != b)
                acc = acc + (c * others) * g
        return acc

    def pullback_rdm(self, N: int, dim: int) -> "PolynomialFunctional":
        """``F o iota_RDM``: each generator ``A`` becomes the N-particle operator ``iota_eps(A)``."""
        if not isinstance(self.context, FiniteN) or self.context.N != N:
            raise ValueError("pullback along the reduced-density map needs a FiniteN(N) functional")
        ctx = OperatorAlgebra(N)
        cache: dict[int, ObservableHierarchy] = {}

        def lift(g: ObservableHierarchy) -> ObservableHierarchy:
            if id(g) not in cache:
                cache[id(g)] = ObservableHierarchy({N: iota_epsilon(g, N, dim)}, ctx, validate=False)
            return cache[id(g)]

        return PolynomialFunctional(tuple((c, tuple(lift(g) for g in gens)) for c, gens in self.monomials), ctx)

    def __repr__(self) -> str:
        return f"PolynomialFunctional({len(self.monomials)} monomials, depth={self.depth}, context={self.context})"


def trace_functional(A: ObservableHierarchy, coefficient: float = 1.0) -> PolynomialFunctional:
    """``Gamma -> coefficient * i Tr(A . Gamma)``."""
    return PolynomialFunctional(((coefficient, (A,)),), A.context)


def constant(value: float, context: Context | None = None) -> PolynomialFunctional:
    return PolynomialFunctional(((float(value), ()),), context if context is not None else Infinite())


def evaluate(F: PolynomialFunctional, gamma: DensityHierarchy) -> float:
    return F(gamma)


def gateaux_derivative(F: PolynomialFunctional, gamma: DensityHierarchy) -> ObservableHierarchy:
    return F.derivative(gamma)


# -- symplectic structure on wave functions -------------------------------------
@dataclass(frozen=True)
class SymplecticForm:
    """``omega(f, g) = 2 Im <f, g>`` for the weighted inner product of ``grid``."""

    grid: GridSpec

    def __call__(self, f: WaveFunction, g: WaveFunction) -> float:
        return 2.0 * f.inner(g).imag


def omega(f: WaveFunction, g: WaveFunction) -> float:
    return 2.0 * f.inner(g).imag


def pb_L2(f_grad: WaveFunction, g_grad: WaveFunction, scale: float = 1.0) -> float:
    """``scale * omega(grad_s f, grad_s g)``; ``scale = N`` gives the N-body variant."""
    return scale * omega(f_grad, g_grad)


def _slot_marginals(vec: np.ndarray, phi: np.ndarray, k: int, h: float) -> np.ndarray:
    """``sum_alpha`` of ``vec`` contracted with ``conj(phi)`` in every slot except ``alpha``."""
    n = phi.size
    tensor = vec.reshape((n,) * k)
    weight = h * phi.conj()
    total = np.zeros(n, dtype=complex)
    for alpha in range(k):
        t = tensor
        # contract the trailing slots first so that axis indices stay valid
        for axis in reversed(range(k)):
            if axis != alpha:
                t = np.tensordot(t, weight, axes=([axis], [0]))
        total += t
    return total


def symplectic_gradient_pullback(F: PolynomialFunctional, phi: WaveFunction) -> WaveFunction:
    """Symplectic gradient of ``phi -> F(iota(phi))`` where ``iota(phi) = (|phi^{⊗k}><phi^{⊗k}|)_k``.

    ``psi_F = sum_k psi_{F,k}``; each ``psi_{F,k}`` contracts
    ``dF^(k) phi^{⊗k}`` against ``k-1`` copies of ``phi`` in every slot
    ``alpha`` and sums over ``alpha``.
    """
    if phi.k != 1:
        raise ValueError("pullback gradients are defined for one-particle states")
    depth = max(F.depth, 1)
    gamma = DensityHierarchy.factorized(phi.values, depth, phi.grid.weights)
    dF = F.derivative(gamma)
    out = np.zeros(phi.grid.n, dtype=complex)
    for k, op in dF.items():
        applied = op.data @ tensor_power(phi.values, k)
        out += _slot_marginals(applied, phi.values, k, phi.grid.h)
    return WaveFunction(out, phi.grid)


def iota_dm_hierarchy(Phi: WaveFunction) -> DensityHierarchy:
    """``|Phi><Phi|`` as a density hierarchy supported at level ``Phi.k``."""
    op = KOperator.outer(Phi.values, Phi.values, Phi.k, Phi.grid.n)
    return DensityHierarchy({Phi.k: op}, Phi.grid.weights, validate=False)


def symplectic_gradient_dm(F: PolynomialFunctional, Phi: WaveFunction) -> WaveFunction:
    """Symplectic gradient of ``Phi -> F(|Phi><Phi|)``, i.e. ``dF[|Phi><Phi|] Phi``.

    ``F`` may be an N-particle operator functional (``OperatorAlgebra(N)``) or
    an N-body hierarchy functional (``FiniteN(N)``), which is first pulled
    back along the reduced-density map.
    """
    N = Phi.k
    if isinstance(F.context, FiniteN):
        F = F.pullback_rdm(N, Phi.grid.n)
    if not isinstance(F.context, OperatorAlgebra) or F.context.N != N:
        raise ValueError(f"functional context {F.context} does not act on {N}-particle states")
    dF = F.derivative(iota_dm_hierarchy(Phi))
    if N not in dF:
        return WaveFunction(np.zeros_like(Phi.values), Phi.grid, N)
    return WaveFunction(dF[N].data @ Phi.values, Phi.grid, N)


# -- finite-difference validation ---------------------------------------------------
@dataclass(frozen=True)
class GradientReport:
    """Analytic directional derivatives next to central finite differences."""

    analytic: np.ndarray
    finite_difference: np.ndarray
    max_relative_deviation: float
    step: float

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_relative_deviation < tol


def relative_deviation(a: np.ndarray, b: np.ndarray, floor: float = 1e-3) -> float:
    """Elementwise ``|a - b| / max(|a|, |b|, floor * scale)``, maximised.

    ``scale`` is the largest magnitude in either array, so a direction along
    which the derivative nearly vanishes is judged against the typical size of
    the derivative instead of its own tiny value.  All-zero inputs give 0.
    """
    a, b = np.asarray(a), np.asarray(b)
    if not a.size:
        return 0.0
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    if scale == 0.0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor * scale)
    return float(np.max(np.abs(a - b) / denom))


def _report(analytic: Sequence[float], fd: Sequence[float], step: float) -> GradientReport:
    a, f = np.array(analytic, dtype=float), np.array(fd, dtype=float)
    return GradientReport(a, f, relative_deviation(a, f), step)


def check_gateaux(
    F: PolynomialFunctional,
    gamma: DensityHierarchy,
    directions: Iterable[DensityHierarchy],
    step: float = 1e-5,
) -> GradientReport:
    """Compare ``i Tr(dF[Gamma] . dGamma)`` with central differences of ``F``."""
    dF = F.derivative(gamma)
    analytic, fd = [], []
    for d in directions:
        analytic.append(dot_trace(dF, d))
        fd.append((F(gamma + step * d) - F(gamma - step * d)) / (2 * step))
    return _report(analytic, fd, step)


def check_symplectic_gradient(
    f: Callable[[WaveFunction], float],
    gradient: WaveFunction,
    phi: WaveFunction,
    directions: Iterable[WaveFunction],
    step: float = 1e-5,
) -> GradientReport:
    """Compare ``omega(grad_s f, v)`` with central differences of ``f`` along ``v``."""
    analytic, fd = [], []
    for v in directions:
        analytic.append(omega(gradient, v))
        fd.append((f(phi + step * v) - f(phi - step * v)) / (2 * step))
    return _report(analytic, fd, step)

