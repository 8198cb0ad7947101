"""Exact rational coefficients of the N-body hierarchy bracket.

Everything here is computed with :class:`fractions.Fraction` and converted to
``float`` only by the caller, so that convergence studies in ``N`` are not
polluted by rounding in the combinatorics.

Multiplicity of the embedding
-----------------------------
The product of two embedded observables ``eps_l(A) eps_j(B)`` splits into
pieces in which ``A`` and ``B`` share ``r`` particles.  Each piece is an
``(l+j-r)``-particle operator that has to be re-expressed as an embedded
``k``-particle operator, with ``k = min(l+j-1, N)``.  Re-embedding a
``m``-particle operator into ``k >= m`` slots overcounts every placement by the
number of ordered choices of the ``k-m`` spectator slots among the ``N-m``
unused particles,

    (N-m)! / (N-k)! = prod_{q=1}^{k-m} (N-k+q).

When ``k = l+j-1`` this is ``prod_{q=1}^{r-1} (N-k+q)``.  When the support is
truncated (``k = N < l+j-1``) the exponent is ``N-l-j+r`` rather than ``r-1``;
the two agree for every ``r <= 2`` and differ once three or more particles
are shared.  :func:`multiplicity` always uses the general count.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from fractions import Fraction
from typing import Callable, Iterator

__all__ = [
    "c_kn",
    "r_min",
    "multiplicity",
    "bracket_coefficient",
    "primed_coefficient",
    "corrupted_coefficients",
]

_perturbation: Callable[[int, int, int, int, int, Fraction], Fraction] | None = None


def c_kn(k: int, N: int) -> Fraction:
    """``C_{k,N} = 1 / (k! * binom(N, k))``."""
    if not 1 <= k <= N:
        raise ValueError(f"C_(k,N) needs 1 <= k <= N, got k={k}, N={N}")
    return Fraction(1, math.factorial(k) * math.comb(N, k))


def r_min(ell: int, j: int, N: int) -> int:
    """Smallest number of shared particles allowed with ``N`` particles in total."""
    return max(1, min(ell, j) - (N - max(ell, j)))


def multiplicity(ell: int, j: int, k: int, r: int, N: int) -> int:
    """Number of spectator placements, ``prod_{q=1}^{k-(l+j-r)} (N-k+q)``."""
    size = ell + j - r
    if size > k:
        raise ValueError(f"an {size}-particle term does not fit in k={k} slots")
    return math.prod(N - k + q for q in range(1, k - size + 1))


def bracket_coefficient(ell: int, j: int, r: int, N: int) -> Fraction:
    """Weight of ``[A^(l), B^(j)]_r`` in component ``k = min(l+j-1, N)``."""
    k = min(ell + j - 1, N)
    if not r_min(ell, j, N) <= r <= min(ell, j):
        raise ValueError(f"r={r} not admissible for l={ell}, j={j}, N={N}")
    value = N * c_kn(ell, N) * c_kn(j, N) / (c_kn(k, N) * multiplicity(ell, j, k, r, N))
    if _perturbation is not None:
        value = _perturbation(ell, j, k, r, N, value)
    return value


def primed_coefficient(ell: int, j: int, r: int, N: int) -> Fraction:
    """``binom(j, r)`` times :func:`bracket_coefficient`; used by vector fields."""
    return math.comb(j, r) * bracket_coefficient(ell, j, r, N)


@contextmanager
def corrupted_coefficients(factor: Fraction | float = Fraction(11, 10), r: int | None = None) -> Iterator[None]:
    """Test hook: scale every bracket coefficient (or only those with the given ``r``).

    Used as a negative control for the verification suites.
    """
    global _perturbation
    factor = Fraction(factor)

    def perturb(ell: int, j: int, k: int, rr: int, N: int, value: Fraction) -> Fraction:
        return value * factor if r is None or rr == r else value

    previous, _perturbation = _perturbation, perturb
    try:
        yield
    finally:
        _perturbation = previous
