"""Periodic 1-D grids and wave functions on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import Weights, check_side, tensor_power

__all__ = ["GridSpec", "WaveFunction"]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid ``x_m = m h`` on ``[0, L)`` with ``h = L / n``.

    An abstract mode space of dimension ``n`` is the grid with ``L = n`` (so
    ``h = 1``).
    """

    n: int
    L: float = 2 * np.pi

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("grid needs at least one point")
        if not self.L > 0:
            raise ValueError("period length must be positive")

    @classmethod
    def modes(cls, n: int) -> "GridSpec":
        return cls(n, float(n))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def weights(self) -> Weights:
        return Weights(self.h)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT order (the Nyquist mode is kept as ``-n/2``)."""
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def periodic_difference(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``a - b`` wrapped into ``[-L/2, L/2)``."""
        d = np.asarray(a) - np.asarray(b)
        return (d + self.L / 2) % self.L - self.L / 2


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex k-particle state sampled on ``grid`` (length ``n**k``, particle 1 slowest)."""

    values: np.ndarray
    grid: GridSpec
    k: int = 1

    def __post_init__(self) -> None:
        check_side(self.grid.n, self.k)
        vals = np.array(self.values, dtype=complex).ravel()
        if vals.size != self.grid.n**self.k:
            raise ValueError(f"expected {self.grid.n ** self.k} values, got {vals.size}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def inner(self, other: "WaveFunction") -> complex:
        """Weighted ``<self, other> = h**k sum conj(self) other``."""
        self._check(other)
        return complex(self.grid.h**self.k * np.vdot(self.values, other.values))

    def norm2(self) -> float:
        return self.inner(self).real

    def tensor_power(self, m: int) -> "WaveFunction":
        if self.k != 1:
            raise ValueError("tensor powers are taken of one-particle states")
        return WaveFunction(tensor_power(self.values, m), self.grid, m)

    def _check(self, other: "WaveFunction") -> None:
        if other.k != self.k or other.grid != self.grid:
            raise ValueError("wave functions live on different spaces")

    def _new(self, values: np.ndarray) -> "WaveFunction":
        return WaveFunction(values, self.grid, self.k)

    def __add__(self, other: "WaveFunction") -> "WaveFunction":
        self._check(other)
        return self._new(self.values + other.values)

    def __sub__(self, other: "WaveFunction") -> "WaveFunction":
        self._check(other)
        return self._new(self.values - other.values)

    def __neg__(self) -> "WaveFunction":
        return self._new(-self.values)

    def __mul__(self, scalar: complex) -> "WaveFunction":
        return self._new(complex(scalar) * self.values)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"WaveFunction(k={self.k}, n={self.grid.n}, norm2={self.norm2():.6g})"
