"""Observable and density-matrix hierarchies and their Lie-Poisson structure.

An observable hierarchy is a finitely supported family ``(A^(1), A^(2), ...)``
of skew-adjoint bosonic k-particle operators; a density hierarchy is a family
of self-adjoint bosonic kernels ``(gamma^(1), gamma^(2), ...)``.  They are
paired by

    i Tr(A . Gamma) = sum_k i h**k trace(A^(k) gamma^(k)).

Three Lie structures are available, selected by a *context*:

``FiniteN(N)``
    the N-body hierarchy bracket, built from r-fold contractions with exact
    rational weights (see :mod:`hierakit.coefficients`);
``Infinite()``
    its large-N limit, which keeps only single contractions;
``OperatorAlgebra(N)``
    plain N-particle operators (a hierarchy supported at level N only) with
    the scaled commutator ``N [A, B]``.

Sign conventions are fixed once: functionals are built from ``i Tr(A . Gamma)``,
the Poisson bracket is ``{F, G}(Gamma) = i Tr([dF, dG] . Gamma)``, and the
Hamiltonian vector field satisfies ``i Tr(dF . X_H) = {F, H}`` with no extra
factor.  ``tests/test_hierarchy_algebra.py`` checks this duality directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Union

import numpy as np

from . import coefficients as coef
from .tensor_core import (
    KOperator,
    Weights,
    _contracted_sum,
    comm_r,
    extend,
    ordered_tuples,
    partial_trace,
    sym_op,
    trace_pair_self_adjoint,
)

if TYPE_CHECKING:  # pragma: no cover
    from .functional_algebra import PolynomialFunctional

__all__ = [
    "FiniteN",
    "Infinite",
    "OperatorAlgebra",
    "Context",
    "HierarchyDepthError",
    "ObservableHierarchy",
    "DensityHierarchy",
    "epsilon",
    "iota_epsilon",
    "bracket_N",
    "bracket_inf",
    "bracket_operator",
    "lie_bracket",
    "dot_trace",
    "dot_trace_complex",
    "poisson_bracket",
    "vector_field_N",
    "vector_field_inf",
    "vector_field",
    "vector_field_operator",
    "coefficient_table",
]


@dataclass(frozen=True)
class FiniteN:
    N: int

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be a positive integer")


@dataclass(frozen=True)
class Infinite:
    pass


@dataclass(frozen=True)
class OperatorAlgebra:
    """N-particle operators with the bracket ``N [A, B]``."""

    N: int


Context = Union[FiniteN, Infinite, OperatorAlgebra]


class HierarchyDepthError(LookupError):
    """A density hierarchy is too short for the requested computation."""


def _scaled_tol(op: KOperator, tol: float) -> float:
    return tol * max(1.0, op.norm_max())


class _Hierarchy:
    """Shared mapping behaviour for both hierarchy types."""

    entries: Mapping[int, KOperator]

    def __getitem__(self, k: int) -> KOperator:
        return self.entries[k]

    def __contains__(self, k: int) -> bool:
        return k in self.entries

    def __iter__(self):
        return iter(sorted(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def items(self):
        return [(k, self.entries[k]) for k in sorted(self.entries)]

    def keys(self) -> list[int]:
        return sorted(self.entries)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self.entries))

    @property
    def depth(self) -> int:
        return max(self.entries, default=0)

    def get(self, k: int) -> KOperator | None:
        return self.entries.get(k)

    def norm_max(self) -> float:
        return max((op.norm_max() for op in self.entries.values()), default=0.0)


def _freeze(entries: Mapping[int, KOperator]) -> dict[int, KOperator]:
    out: dict[int, KOperator] = {}
    for k in sorted(entries):
        op = entries[k]
        if not isinstance(op, KOperator):
            raise TypeError(f"entry {k} is not a KOperator")
        if op.k != k:
            raise ValueError(f"entry stored at level {k} has {op.k} particles")
        out[int(k)] = op
    dims = {op.dim for op in out.values()}
    if len(dims) > 1:
        raise ValueError(f"entries use different one-particle dimensions {dims}")
    return out


def _combine(a: dict[int, KOperator], b: dict[int, KOperator], sign: float) -> dict[int, KOperator]:
    out = dict(a)
    for k, op in b.items():
        out[k] = out[k] + sign * op if k in out else sign * op
    return out


@dataclass(frozen=True, eq=False)
class ObservableHierarchy(_Hierarchy):
    """Finitely supported sequence of skew-adjoint bosonic operators.

    Parameters
    ----------
    entries : mapping
        ``k -> KOperator`` with ``op.k == k``.
    context : FiniteN, Infinite or OperatorAlgebra
        Which Lie structure the hierarchy belongs to.  For ``FiniteN(N)`` the
        support must lie in ``1..N``; for ``OperatorAlgebra(N)`` it must be
        ``{N}`` (or empty).
    validate : bool
        Check skew-adjointness and bosonic symmetry (relative tolerance ``tol``).
    """

    entries: Mapping[int, KOperator] = field(default_factory=dict)
    context: Context = field(default_factory=Infinite)
    validate: bool = True
    tol: float = 1e-12

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", _freeze(self.entries))
        ctx = self.context
        if isinstance(ctx, FiniteN) and any(k > ctx.N for k in self.entries):
            raise ValueError(f"support {self.support} not contained in 1..{ctx.N}")
        if isinstance(ctx, OperatorAlgebra) and any(k != ctx.N for k in self.entries):
            raise ValueError(f"operator-algebra element must live at level {ctx.N}")
        if self.validate:
            for k, op in self.entries.items():
                tol = _scaled_tol(op, self.tol)
                if not op.is_skew_adjoint(tol):
                    raise ValueError(f"entry {k} is not skew-adjoint")
                if not op.is_bosonic(tol):
                    raise ValueError(f"entry {k} is not bosonic")

    @property
    def dim(self) -> int | None:
        return next((op.dim for op in self.entries.values()), None)

    def _new(self, entries: dict[int, KOperator]) -> "ObservableHierarchy":
        return ObservableHierarchy(entries, self.context, validate=False)

    def __add__(self, other: "ObservableHierarchy") -> "ObservableHierarchy":
        return self._new(_combine(dict(self.entries), dict(other.entries), 1.0))

    def __sub__(self, other: "ObservableHierarchy") -> "ObservableHierarchy":
        return self._new(_combine(dict(self.entries), dict(other.entries), -1.0))

    def __neg__(self) -> "ObservableHierarchy":
        return self._new({k: -op for k, op in self.entries.items()})

    def __mul__(self, scalar: float) -> "ObservableHierarchy":
        return self._new({k: float(scalar) * op for k, op in self.entries.items()})

    __rmul__ = __mul__

    def with_context(self, context: Context) -> "ObservableHierarchy":
        return ObservableHierarchy(self.entries, context, validate=False)

    def distance(self, other: "ObservableHierarchy") -> float:
        """Max-norm distance over all components (missing entries count as zero)."""
        return (self - other).norm_max()

    def __repr__(self) -> str:
        return f"ObservableHierarchy(support={self.support}, context={self.context})"


@dataclass(frozen=True, eq=False)
class DensityHierarchy(_Hierarchy):
    """Sequence of self-adjoint bosonic kernels ``gamma^(k)`` with quadrature weights."""

    entries: Mapping[int, KOperator] = field(default_factory=dict)
    weights: Weights = field(default_factory=Weights)
    validate: bool = True
    tol: float = 1e-12

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", _freeze(self.entries))
        if not isinstance(self.weights, Weights):
            object.__setattr__(self, "weights", Weights(float(self.weights)))
        if self.validate:
            for k, op in self.entries.items():
                tol = _scaled_tol(op, self.tol)
                if not op.is_self_adjoint(tol):
                    raise ValueError(f"entry {k} is not self-adjoint")
                if not op.is_bosonic(tol):
                    raise ValueError(f"entry {k} is not bosonic")

    @property
    def dim(self) -> int | None:
        return next((op.dim for op in self.entries.values()), None)

    def _new(self, entries: dict[int, KOperator]) -> "DensityHierarchy":
        return DensityHierarchy(entries, self.weights, validate=False)

    def __add__(self, other: "DensityHierarchy") -> "DensityHierarchy":
        return self._new(_combine(dict(self.entries), dict(other.entries), 1.0))

    def __sub__(self, other: "DensityHierarchy") -> "DensityHierarchy":
        return self._new(_combine(dict(self.entries), dict(other.entries), -1.0))

    def __neg__(self) -> "DensityHierarchy":
        return self._new({k: -op for k, op in self.entries.items()})

    def __mul__(self, scalar: float) -> "DensityHierarchy":
        return self._new({k: float(scalar) * op for k, op in self.entries.items()})

    __rmul__ = __mul__

    @classmethod
    def factorized(cls, vec: np.ndarray, depth: int, weights: Weights | float = 1.0) -> "DensityHierarchy":
        """``(|v^{⊗k}><v^{⊗k}|)_{k=1..depth}`` for a one-particle vector ``v``."""
        vec = np.asarray(vec, dtype=complex).ravel()
        weights = weights if isinstance(weights, Weights) else Weights(float(weights))
        entries, power = {}, np.ones(1, dtype=complex)
        for k in range(1, depth + 1):
            power = np.kron(power, vec)
            entries[k] = KOperator.outer(power, power, k, vec.size)
        return cls(entries, weights, validate=False)

    def truncate(self, depth: int) -> "DensityHierarchy":
        return self._new({k: op for k, op in self.entries.items() if k <= depth})

    def distance(self, other: "DensityHierarchy") -> float:
        return (self - other).norm_max()

    def hermitized(self) -> tuple["DensityHierarchy", float]:
        """Return ``(gamma + gamma*)/2`` componentwise and the max correction applied."""
        fixed, worst = {}, 0.0
        for k, op in self.entries.items():
            herm = 0.5 * (op.data + op.data.conj().T)
            worst = max(worst, float(np.max(np.abs(herm - op.data))))
            fixed[k] = KOperator(k, op.dim, herm)
        return self._new(fixed), worst

    def __repr__(self) -> str:
        return f"DensityHierarchy(levels={self.support}, h={self.weights.h})"


# -- embeddings ---------------------------------------------------------------
def epsilon(A: KOperator, N: int) -> KOperator:
    """Average of ``A`` over all ordered placements into ``N`` particles.

    ``C_{k,N} sum_{p in P_k^N} A_(p)``.  Builds ``d**N`` matrices, so it is
    meant for small ``N`` only.
    """
    if A.k > N:
        raise ValueError(f"cannot embed a {A.k}-particle operator into {N} particles")
    acc = None
    for p in ordered_tuples(A.k, N):
        term = extend(A, p, N).data
        acc = term.copy() if acc is None else acc + term
    return KOperator(N, A.dim, float(coef.c_kn(A.k, N)) * acc)


def iota_epsilon(A: ObservableHierarchy, N: int, dim: int | None = None) -> KOperator:
    """``sum_k epsilon(A^(k), N)`` as a single N-particle operator."""
    dim = A.dim if dim is None else dim
    if dim is None:
        raise ValueError("dimension needed for an empty hierarchy")
    if any(k > N for k in A.entries):
        raise ValueError(f"support {A.support} exceeds N={N}")
    total = KOperator.zeros(N, dim)
    for _, op in A.items():
        total = total + epsilon(op, N)
    return total


# -- brackets -----------------------------------------------------------------
def _accumulate(out: dict[int, KOperator], k: int, op: KOperator) -> None:
    out[k] = out[k] + op if k in out else op


def _symmetrized(raw: dict[int, KOperator], context: Context) -> ObservableHierarchy:
    return ObservableHierarchy({k: sym_op(op) for k, op in sorted(raw.items())}, context, validate=False)


def bracket_N(A: ObservableHierarchy, B: ObservableHierarchy, N: int) -> ObservableHierarchy:
    """N-body hierarchy bracket.

    Component ``k`` collects ``Sym_k sum_r c_{l j r N} [A^(l), B^(j)]_r`` over
    all ``l, j`` with ``min(l+j-1, N) = k``; only k-particle matrices are ever
    formed, so ``N`` may be large.
    """
    for H in (A, B):
        if any(k > N for k in H.entries):
            raise ValueError(f"support {H.support} exceeds N={N}")
    raw: dict[int, KOperator] = {}
    for ell, a in A.items():
        for j, b in B.items():
            k = min(ell + j - 1, N)
            for r in range(coef.r_min(ell, j, N), min(ell, j) + 1):
                weight = float(coef.bracket_coefficient(ell, j, r, N))
                _accumulate(raw, k, weight * comm_r(a, b, r, k))
    return _symmetrized(raw, FiniteN(N))


def bracket_inf(A: ObservableHierarchy, B: ObservableHierarchy) -> ObservableHierarchy:
    """Limiting bracket: ``C^(k) = Sym_k sum_{l+j-1=k} [A^(l), B^(j)]_1``."""
    raw: dict[int, KOperator] = {}
    for ell, a in A.items():
        for j, b in B.items():
            _accumulate(raw, ell + j - 1, comm_r(a, b, 1))
    return _symmetrized(raw, Infinite())


def bracket_operator(A: ObservableHierarchy, B: ObservableHierarchy, N: int) -> ObservableHierarchy:
    """``N [A, B]`` for N-particle operators stored at level N."""
    out = {}
    if N in A and N in B:
        out[N] = N * A[N].commutator(B[N])
    return ObservableHierarchy(out, OperatorAlgebra(N), validate=False)


def lie_bracket(A: ObservableHierarchy, B: ObservableHierarchy, context: Context) -> ObservableHierarchy:
    if isinstance(context, FiniteN):
        return bracket_N(A, B, context.N)
    if isinstance(context, OperatorAlgebra):
        return bracket_operator(A, B, context.N)
    if isinstance(context, Infinite):
        return bracket_inf(A, B)
    raise TypeError(f"unknown context {context!r}")


# -- pairing, Poisson bracket, vector fields ------------------------------------
def dot_trace_complex(A: ObservableHierarchy, gamma: DensityHierarchy) -> complex:
    """``i Tr(A . Gamma)`` before discarding the (vanishing) imaginary part.

    Every level of ``gamma`` is taken to be self-adjoint, as densities, their
    tangent directions and Hamiltonian vector fields all are."""
    total = 0j
    for k, op in A.items():
        if k not in gamma:
            raise HierarchyDepthError(f"density hierarchy has no level {k} (levels {gamma.support})")
        total += 1j * trace_pair_self_adjoint(op, gamma[k], gamma.weights)
    return total


def dot_trace(A: ObservableHierarchy, gamma: DensityHierarchy) -> float:
    """Real pairing ``i Tr(A . Gamma)`` of a skew-adjoint and a self-adjoint hierarchy."""
    return dot_trace_complex(A, gamma).real


def poisson_bracket(
    F: "PolynomialFunctional",
    G: "PolynomialFunctional",
    gamma: DensityHierarchy,
    context: Context,
) -> float:
    """Lie-Poisson bracket ``{F, G}(Gamma) = i Tr([dF, dG] . Gamma)``."""
    dF = F.derivative(gamma)
    dG = G.derivative(gamma)
    return dot_trace(lie_bracket(dF, dG, context), gamma)


def _commutator_trace(S: np.ndarray, gamma_k: KOperator, keep: int, w: Weights) -> KOperator:
    comm = KOperator(gamma_k.k, gamma_k.dim, S @ gamma_k.data - gamma_k.data @ S)
    return partial_trace(comm, keep, w)


def vector_field_N(H: "PolynomialFunctional", gamma: DensityHierarchy, N: int) -> DensityHierarchy:
    """Hamiltonian vector field on N-body density hierarchies.

    ``X^(l) = sum_j sum_r c'_{l j r N} Tr_{l+1..k}[S_{l j r}, gamma^(k)]`` with
    ``k = min(l+j-1, N)`` and ``S = sum_{alpha in P_r^l} dH^(j)_(alpha, l+1, ..., l+j-r)``.
    """
    missing = [k for k in range(1, N + 1) if k not in gamma]
    if missing:
        raise HierarchyDepthError(f"N-body hierarchy lacks levels {missing}")
    dH = H.derivative(gamma)
    if any(j > N for j in dH.entries):
        raise ValueError(f"derivative support {dH.support} exceeds N={N}")
    out: dict[int, KOperator] = {}
    for ell in range(1, N + 1):
        acc = KOperator.zeros(ell, gamma[ell].dim)
        for j, b in dH.items():
            k = min(ell + j - 1, N)
            for r in range(coef.r_min(ell, j, N), min(ell, j) + 1):
                weight = float(coef.primed_coefficient(ell, j, r, N))
                S = _contracted_sum(b, ell, r, k)
                acc = acc + weight * _commutator_trace(S, gamma[k], ell, gamma.weights)
        out[ell] = acc
    return DensityHierarchy(out, gamma.weights, validate=False)


def vector_field_inf(
    H: "PolynomialFunctional",
    gamma: DensityHierarchy,
    levels: Iterable[int] | None = None,
) -> DensityHierarchy:
    """Hamiltonian vector field of the limiting bracket.

    ``X^(l) = sum_j j Tr_{l+1..l+j-1}[sum_alpha dH^(j)_(alpha, l+1, ..., l+j-1), gamma^(l+j-1)]``.

    Parameters
    ----------
    levels : iterable of int, optional
        Components to compute; defaults to every level present in ``gamma``.
        A :class:`HierarchyDepthError` is raised when a needed
        ``gamma^(l+j-1)`` is missing.
    """
    dH = H.derivative(gamma)
    levels = gamma.keys() if levels is None else sorted(levels)
    out: dict[int, KOperator] = {}
    for ell in levels:
        if ell not in gamma:
            raise HierarchyDepthError(f"hierarchy depth exhausted: no level {ell}")
        acc = KOperator.zeros(ell, gamma[ell].dim)
        for j, b in dH.items():
            k = ell + j - 1
            if k not in gamma:
                raise HierarchyDepthError(
                    f"hierarchy depth exhausted: level {ell} needs gamma^({k}), "
                    f"available levels are {gamma.support}"
                )
            S = _contracted_sum(b, ell, 1, k)
            acc = acc + j * _commutator_trace(S, gamma[k], ell, gamma.weights)
        out[ell] = acc
    return DensityHierarchy(out, gamma.weights, validate=False)


def vector_field_operator(H: "PolynomialFunctional", gamma: DensityHierarchy, N: int) -> DensityHierarchy:
    """Vector field for ``N [A, B]`` on N-particle density matrices: ``N [dH, Psi]``."""
    dH = H.derivative(gamma)
    out = {}
    if N in dH:
        psi = gamma[N]
        out[N] = KOperator(N, psi.dim, N * (dH[N].data @ psi.data - psi.data @ dH[N].data))
    else:
        out[N] = KOperator.zeros(N, gamma[N].dim)
    return DensityHierarchy(out, gamma.weights, validate=False)


def vector_field(H: "PolynomialFunctional", gamma: DensityHierarchy, context: Context, **kwargs) -> DensityHierarchy:
    if isinstance(context, FiniteN):
        return vector_field_N(H, gamma, context.N)
    if isinstance(context, OperatorAlgebra):
        return vector_field_operator(H, gamma, context.N)
    return vector_field_inf(H, gamma, **kwargs)


def coefficient_table(N: int, max_support: int) -> list[tuple[int, int, int, int, str]]:
    """Rows ``(l, j, k, r, c)`` of exact bracket weights, for reports and docs."""
    rows = []
    for ell in range(1, max_support + 1):
        for j in range(1, max_support + 1):
            if max(ell, j) > N:
                continue
            k = min(ell + j - 1, N)
            for r in range(coef.r_min(ell, j, N), min(ell, j) + 1):
                rows.append((ell, j, k, r, str(coef.bracket_coefficient(ell, j, r, N))))
    return rows

