"""Dense multi-particle operator algebra.

A k-particle operator on a one-particle space of dimension ``d`` is stored as
a ``d**k x d**k`` complex matrix.  Row and column indices enumerate k-tuples
``(i_1, ..., i_k)`` with ``i_1`` varying slowest, which is the ordering used by
``numpy.kron``: ``kron(X, Y)`` puts ``X`` on particle 1 and ``Y`` on
particle 2.

Two kinds of objects share this storage:

* observables act on coefficient vectors by ordinary matrix-vector products;
* density matrices are stored through their kernel values ``gamma(x; x')``.

With a quadrature weight ``h`` per particle index, the weighted trace of an
observable against a kernel is ``h**k * trace(A @ gamma)`` and a partial trace
over ``m`` particles carries ``h**m``.  For abstract mode spaces ``h = 1``.

Permutations are written as tuples of 1-based images, ``perm[m-1] = pi(m)``.
The permutation operator acts on functions by
``(P_pi f)(x_1, ..., x_k) = f(x_pi(1), ..., x_pi(k))``, so that
``P_pi P_sigma = P_{pi o sigma}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "DEFAULT_MAX_SIDE",
    "SizeGuardError",
    "KOperator",
    "Weights",
    "set_max_side",
    "max_side",
    "check_side",
    "identity",
    "permutation_matrix",
    "compose",
    "inverse",
    "ordered_tuples",
    "count_ordered_tuples",
    "permute_conjugate",
    "extend",
    "sym_op",
    "is_bosonic",
    "adjoint",
    "trace_pair",
    "trace_pair_self_adjoint",
    "partial_trace",
    "contract_r",
    "comm_r",
    "tensor_power",
]

DEFAULT_MAX_SIDE = 4096
_max_side = DEFAULT_MAX_SIDE


class SizeGuardError(ValueError):
    """Raised when a dense operator would exceed the configured side length."""


def set_max_side(value: int) -> int:
    """Set the largest allowed matrix side ``d**k``; return the previous value."""
    global _max_side
    if value < 1:
        raise ValueError("maximum side must be positive")
    previous, _max_side = _max_side, int(value)
    return previous


def max_side() -> int:
    return _max_side


def check_side(dim: int, k: int) -> int:
    """Return ``dim**k`` or raise :class:`SizeGuardError` if it is too large."""
    side = dim**k
    if side > _max_side:
        raise SizeGuardError(
            f"{k}-particle operator with one-particle dimension {dim} has side "
            f"{side} > {_max_side}; raise the limit with set_max_side()"
        )
    return side


@dataclass(frozen=True)
class Weights:
    """Quadrature weight per one-particle index (``h`` on a grid, 1 otherwise)."""

    h: float = 1.0

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ValueError("quadrature weight must be positive")

    def power(self, k: int) -> float:
        return self.h**k


def _as_weights(w: Weights | float | None) -> Weights:
    if w is None:
        return Weights()
    if isinstance(w, Weights):
        return w
    return Weights(float(w))


@dataclass(frozen=True, eq=False)
class KOperator:
    """A k-particle operator stored as a dense ``d**k x d**k`` matrix.

    Parameters
    ----------
    k : int
        Particle count.
    dim : int
        One-particle dimension ``d``.
    data : ndarray
        Complex matrix of side ``d**k``.  It is copied and made read-only.
    """

    k: int
    dim: int
    data: np.ndarray

    def __post_init__(self) -> None:
        self._install(np.array(self.data, dtype=complex))

    def _install(self, data: np.ndarray) -> None:
        if self.k < 1 or self.dim < 1:
            raise ValueError("k and dim must be positive integers")
        side = check_side(self.dim, self.k)
        if data.shape != (side, side):
            raise ValueError(
                f"expected a {side}x{side} matrix for k={self.k}, d={self.dim}; "
                f"got shape {data.shape}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _adopt(cls, k: int, dim: int, data: np.ndarray) -> "KOperator":
        """Wrap a freshly allocated complex array without the defensive copy."""
        op = object.__new__(cls)
        object.__setattr__(op, "k", k)
        object.__setattr__(op, "dim", dim)
        op._install(data)
        return op

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, dim: int) -> "KOperator":
        """Infer the particle count from the side length of ``matrix``."""
        side = np.shape(matrix)[0]
        k = round(math.log(side, dim)) if dim > 1 else 1
        if dim**k != side:
            raise ValueError(f"side {side} is not a power of {dim}")
        return cls(k, dim, matrix)

    @classmethod
    def zeros(cls, k: int, dim: int) -> "KOperator":
        side = check_side(dim, k)
        return cls(k, dim, np.zeros((side, side), dtype=complex))

    @classmethod
    def outer(cls, f: np.ndarray, g: np.ndarray, k: int, dim: int) -> "KOperator":
        """Kernel ``f(x) conj(g(x'))`` of the rank-one operator ``|f><g|``."""
        f = np.asarray(f, dtype=complex).ravel()
        g = np.asarray(g, dtype=complex).ravel()
        return cls._adopt(k, dim, np.outer(f, g.conj()))

    # -- algebra --------------------------------------------------------------
    def _check_compatible(self, other: "KOperator") -> None:
        if not isinstance(other, KOperator):
            raise TypeError(f"expected KOperator, got {type(other).__name__}")
        if (self.k, self.dim) != (other.k, other.dim):
            raise ValueError(
                f"shape mismatch: (k={self.k}, d={self.dim}) vs "
                f"(k={other.k}, d={other.dim})"
            )

    def __add__(self, other: "KOperator") -> "KOperator":
        self._check_compatible(other)
        return KOperator(self.k, self.dim, self.data + other.data)

    def __sub__(self, other: "KOperator") -> "KOperator":
        self._check_compatible(other)
        return KOperator(self.k, self.dim, self.data - other.data)

    def __neg__(self) -> "KOperator":
        return KOperator(self.k, self.dim, -self.data)

    def __mul__(self, scalar: complex) -> "KOperator":
        if isinstance(scalar, KOperator):
            raise TypeError("use @ for operator products")
        return KOperator(self.k, self.dim, complex(scalar) * self.data)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "KOperator":
        return KOperator(self.k, self.dim, self.data / complex(scalar))

    def __matmul__(self, other: "KOperator") -> "KOperator":
        self._check_compatible(other)
        return KOperator(self.k, self.dim, self.data @ other.data)

    def commutator(self, other: "KOperator") -> "KOperator":
        self._check_compatible(other)
        return KOperator(self.k, self.dim, self.data @ other.data - other.data @ self.data)

    @property
    def side(self) -> int:
        return self.data.shape[0]

    @property
    def H(self) -> "KOperator":
        return adjoint(self)

    def norm_max(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.data - self.data.conj().T))) <= tol

    def is_skew_adjoint(self, tol: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.data + self.data.conj().T))) <= tol

    def is_bosonic(self, tol: float = 1e-12) -> bool:
        return is_bosonic(self, tol)

    def allclose(self, other: "KOperator", atol: float = 1e-12) -> bool:
        self._check_compatible(other)
        return float(np.max(np.abs(self.data - other.data))) <= atol

    def tensor(self) -> np.ndarray:
        """View as a tensor with ``k`` row axes followed by ``k`` column axes."""
        return self.data.reshape((self.dim,) * (2 * self.k))

    def __repr__(self) -> str:
        return f"KOperator(k={self.k}, dim={self.dim}, norm_max={self.norm_max():.3e})"


def identity(k: int, dim: int) -> KOperator:
    return KOperator(k, dim, np.eye(check_side(dim, k), dtype=complex))


def tensor_power(vec: np.ndarray, k: int) -> np.ndarray:
    """Flattened ``vec ⊗ ... ⊗ vec`` (k factors), particle 1 slowest."""
    out = np.ones(1, dtype=complex)
    for _ in range(k):
        out = np.kron(out, vec)
    return out


# -- permutations ------------------------------------------------------------
def _validate_perm(perm: Sequence[int], k: int) -> tuple[int, ...]:
    perm = tuple(int(p) for p in perm)
    if len(perm) != k:
        raise ValueError(f"permutation of length {len(perm)} does not act on {k} particles")
    if sorted(perm) != list(range(1, k + 1)):
        raise ValueError(f"{perm} is not a permutation of 1..{k}")
    return perm


def compose(pi: Sequence[int], sigma: Sequence[int]) -> tuple[int, ...]:
    """Return ``pi o sigma``, i.e. ``m -> pi(sigma(m))``."""
    return tuple(pi[s - 1] for s in sigma)


def inverse(pi: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(pi)
    for m, p in enumerate(pi, start=1):
        inv[p - 1] = m
    return tuple(inv)


def _function_axes(perm: Sequence[int]) -> tuple[int, ...]:
    # transpose(F, axes)[i] = F[j] with j[axes[m]] = i[m]; we need
    # j[m'] = i[perm(m')], hence axes = perm^{-1} (0-based).
    return tuple(p - 1 for p in inverse(perm))


def permutation_matrix(perm: Sequence[int], dim: int) -> np.ndarray:
    """Dense matrix of ``P_pi`` on ``(C^dim)^{⊗k}``."""
    k = len(perm)
    perm = _validate_perm(perm, k)
    side = check_side(dim, k)
    basis = np.eye(side, dtype=complex).reshape((dim,) * k + (side,))
    axes = _function_axes(perm) + (k,)
    return np.transpose(basis, axes).reshape(side, side)


def _conjugate_tensor(data: np.ndarray, perm: Sequence[int], dim: int) -> np.ndarray:
    """``P_pi M P_pi^{-1}`` computed by axis transposition."""
    k = len(perm)
    side = dim**k
    axes = _function_axes(perm)
    # Rows transform like functions; columns like the dual, i.e. with the same
    # relabelling because P_pi is a real orthogonal matrix.
    full = axes + tuple(k + a for a in axes)
    return np.transpose(data.reshape((dim,) * (2 * k)), full).reshape(side, side)


def permute_conjugate(A: KOperator, perm: Sequence[int]) -> KOperator:
    """Return ``A_(pi(1),...,pi(k)) = P_pi A P_pi^{-1}``.

    Slot ``m`` of ``A`` ends up acting on particle ``pi(m)``.
    """
    perm = _validate_perm(perm, A.k)
    return KOperator(A.k, A.dim, _conjugate_tensor(A.data, perm, A.dim))


def ordered_tuples(r: int, n: int) -> Iterator[tuple[int, ...]]:
    """Ordered r-tuples of distinct elements of ``{1..n}`` in lexicographic order."""
    return itertools.permutations(range(1, n + 1), r)


def count_ordered_tuples(r: int, n: int) -> int:
    """``|P_r^n| = r! * binom(n, r)``."""
    return math.factorial(r) * math.comb(n, r) if 0 <= r <= n else 0


def _slot_permutation(slots: Sequence[int], k_target: int) -> tuple[int, ...]:
    free = [m for m in range(1, k_target + 1) if m not in slots]
    return tuple(slots) + tuple(free)


def extend(
    A: KOperator,
    slots: Sequence[int],
    k_target: int,
    *,
    fill: Sequence[int] | None = None,
) -> KOperator:
    """Place ``A`` on the given particle slots of a ``k_target``-particle space.

    Returns ``A_(l_1,...,l_i)``: slot ``m`` of ``A`` acts on particle
    ``slots[m-1]``, and the identity acts on the remaining particles.

    Parameters
    ----------
    fill : sequence of int, optional
        Order in which the unused particles receive the identity factors.  The
        result does not depend on it; the argument exists so that this
        independence can be tested.
    """
    slots = tuple(int(s) for s in slots)
    if len(set(slots)) != len(slots):
        raise ValueError(f"duplicate slots in {slots}")
    if any(s < 1 or s > k_target for s in slots):
        raise ValueError(f"slots {slots} out of range 1..{k_target}")
    if len(slots) != A.k:
        raise ValueError(f"{len(slots)} slots given for a {A.k}-particle operator")
    check_side(A.dim, k_target)
    extra = k_target - A.k
    big = A.data if extra == 0 else np.kron(A.data, np.eye(A.dim**extra))
    if fill is None:
        perm = _slot_permutation(slots, k_target)
    else:
        fill = tuple(int(s) for s in fill)
        if sorted(slots + fill) != list(range(1, k_target + 1)):
            raise ValueError("fill must list exactly the unused slots")
        perm = slots + fill
    if perm == tuple(range(1, k_target + 1)):
        return KOperator(k_target, A.dim, big)
    return KOperator(k_target, A.dim, _conjugate_tensor(big, perm, A.dim))


def sym_op(A: KOperator, max_k: int = 8) -> KOperator:
    """Bosonic symmetrization ``(1/k!) sum_pi P_pi A P_pi^{-1}``."""
    if A.k > max_k:
        raise SizeGuardError(f"symmetrization over {A.k}! permutations exceeds max_k={max_k}")
    if A.k == 1:
        return A
    acc = np.zeros_like(A.data)
    for perm in itertools.permutations(range(1, A.k + 1)):
        acc += _conjugate_tensor(A.data, perm, A.dim)
    return KOperator(A.k, A.dim, acc / math.factorial(A.k))


def is_bosonic(A: KOperator, tol: float = 1e-12) -> bool:
    """Check invariance under conjugation by every permutation (adjacent swaps suffice)."""
    for m in range(1, A.k):
        swap = list(range(1, A.k + 1))
        swap[m - 1], swap[m] = swap[m], swap[m - 1]
        if np.max(np.abs(_conjugate_tensor(A.data, swap, A.dim) - A.data), initial=0.0) > tol:
            return False
    return True


def adjoint(A: KOperator) -> KOperator:
    """Adjoint; with uniform weights this is the conjugate transpose."""
    return KOperator(A.k, A.dim, A.data.conj().T)


def trace_pair(A: KOperator, gamma: KOperator, w: Weights | float | None = None) -> complex:
    """Weighted trace ``h**k * trace(A @ gamma)``."""
    A._check_compatible(gamma)
    w = _as_weights(w)
    # trace(A @ gamma) without forming the product
    return complex(w.power(A.k) * np.einsum("ij,ji->", A.data, gamma.data))


def trace_pair_self_adjoint(A: KOperator, gamma: KOperator, w: Weights | float | None = None) -> complex:
    """:func:`trace_pair` for self-adjoint ``gamma``.

    Uses ``trace(A @ gamma) = sum(A * conj(gamma))``, which reads both arrays in
    storage order and is much faster than the transposed sum on large operators.
    The result is wrong if ``gamma`` is not self-adjoint."""
    A._check_compatible(gamma)
    w = _as_weights(w)
    return complex(w.power(A.k) * np.vdot(gamma.data, A.data))


def partial_trace(M: KOperator, keep: int, w: Weights | float | None = None) -> KOperator:
    """Trace out particles ``keep+1, ..., k``; carries the weight ``h**(k-keep)``."""
    if keep < 1 or keep > M.k:
        raise ValueError(f"cannot keep {keep} of {M.k} particles")
    if keep == M.k:
        return M
    w = _as_weights(w)
    a, b = M.dim**keep, M.dim ** (M.k - keep)
    reduced = np.einsum("iaja->ij", M.data.reshape(a, b, a, b))
    return KOperator(keep, M.dim, w.power(M.k - keep) * reduced)


def _contracted_sum(B: KOperator, ell: int, r: int, k_target: int) -> np.ndarray:
    """``sum_{alpha in P_r^ell} B_(alpha, ell+1, ..., ell+j-r)`` on ``k_target`` slots."""
    tail = tuple(range(ell + 1, ell + B.k - r + 1))
    acc = None
    for alpha in ordered_tuples(r, ell):
        term = extend(B, alpha + tail, k_target).data
        acc = term.copy() if acc is None else acc + term
    return acc


def contract_r(A: KOperator, B: KOperator, r: int, k_target: int | None = None) -> KOperator:
    """r-fold contraction ``A o_r B``.

    ``A_(1..l) * sum_{alpha in P_r^l} B_(alpha, l+1, ..., l+j-r)`` as an
    operator on ``k_target >= l + j - r`` particles (identity on the rest).
    """
    ell, j = A.k, B.k
    if A.dim != B.dim:
        raise ValueError("operators act on different one-particle spaces")
    if r < 1 or r > min(ell, j):
        raise ValueError(f"r={r} out of range 1..{min(ell, j)}")
    size = ell + j - r
    k_target = size if k_target is None else k_target
    if k_target < size:
        raise ValueError(f"k_target={k_target} smaller than l+j-r={size}")
    left = extend(A, tuple(range(1, ell + 1)), k_target).data
    return KOperator(k_target, A.dim, left @ _contracted_sum(B, ell, r, k_target))


def comm_r(A: KOperator, B: KOperator, r: int, k_target: int | None = None) -> KOperator:
    """``binom(j, r) A o_r B - binom(l, r) B o_r A``."""
    ell, j = A.k, B.k
    k_target = ell + j - r if k_target is None else k_target
    left = contract_r(A, B, r, k_target)
    right = contract_r(B, A, r, k_target)
    return math.comb(j, r) * left - math.comb(ell, r) * right


def random_matrix(rng: np.random.Generator, side: int) -> np.ndarray:
    """Complex Gaussian matrix, used by the seeded instance generators."""
    return rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))


def kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out
