"""Periodic spectral fields on a uniform torus grid.

A :class:`SpectralField` holds real samples on ``[0, L)`` together with their
``rfft`` coefficients. Wavenumbers are angular, ``xi_m = 2 pi m / L``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def wavenumbers(n: int, length: float) -> np.ndarray:
    """Nonnegative angular wavenumbers matching ``np.fft.rfft`` output."""
    return 2.0 * np.pi / length * np.arange(n // 2 + 1)


def dealias_mask(n: int) -> np.ndarray:
    """Boolean mask of modes kept by the 2/3 rule (``m <= n/3``)."""
    m = np.arange(n // 2 + 1)
    return m <= n / 3.0


def odd_derivative_symbol(n: int, length: float) -> np.ndarray:
    """``i xi`` with the Nyquist entry zeroed (real-field compatible)."""
    k = 1j * wavenumbers(n, length)
    if n % 2 == 0:
        k[-1] = 0.0
    return k


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real periodic field sampled at ``y_i = i L / N``."""

    values: np.ndarray
    length: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("SpectralField expects a 1D sample array")
        object.__setattr__(self, "values", vals)
        if not self.length > 0:
            raise ValueError("domain length must be positive")

    @classmethod
    def from_hat(cls, hat: np.ndarray, length: float, n: int) -> "SpectralField":
        f = cls(np.fft.irfft(hat, n=n), length)
        # keep the exact coefficients; irfft drops the imaginary Nyquist part
        h = np.array(hat, dtype=complex)
        if n % 2 == 0:
            h[-1] = h[-1].real
        h[0] = h[0].real
        f.__dict__["hat"] = h
        return f

    @classmethod
    def from_function(cls, fn, n: int, length: float) -> "SpectralField":
        return cls(fn(grid(n, length)), length)

    @classmethod
    def zeros(cls, n: int, length: float) -> "SpectralField":
        return cls(np.zeros(n), length)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dy(self) -> float:
        return self.length / self.n

    @property
    def y(self) -> np.ndarray:
        return grid(self.n, self.length)

    @cached_property
    def hat(self) -> np.ndarray:
        return np.fft.rfft(self.values)

    @property
    def xi(self) -> np.ndarray:
        return wavenumbers(self.n, self.length)

    @property
    def mean(self) -> float:
        return float(self.hat[0].real) / self.n

    def with_values(self, values: np.ndarray) -> "SpectralField":
        return SpectralField(values, self.length)

    def with_hat(self, hat: np.ndarray) -> "SpectralField":
        return SpectralField.from_hat(hat, self.length, self.n)

    def derivative(self, order: int = 1) -> "SpectralField":
        if order % 2:
            sym = odd_derivative_symbol(self.n, self.length) ** order
        else:
            sym = (1j * self.xi) ** order
        return self.with_hat(self.hat * sym)

    def antiderivative(self) -> "SpectralField":
        """Zero-mean antiderivative of the mean-free part."""
        sym = odd_derivative_symbol(self.n, self.length)
        out = np.zeros_like(self.hat)
        nz = sym != 0
        out[nz] = self.hat[nz] / sym[nz]
        return self.with_hat(out)

    def dealiased(self) -> "SpectralField":
        return self.with_hat(np.where(dealias_mask(self.n), self.hat, 0.0))

    def lp_norm(self, p: float = 2.0) -> float:
        return lp_norm(self.values, self.dy, p)

    def integral(self) -> float:
        return self.mean * self.length

    def __add__(self, other):
        if isinstance(other, SpectralField):
            _check_compatible(self, other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            _check_compatible(self, other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, c):
        if isinstance(c, SpectralField):
            raise TypeError("use dealiased_product for field products")
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(n={self.n}, length={self.length:g})"


@dataclass(frozen=True, eq=False)
class FluidState:
    """Lagrangian perturbation pair ``a = eta - eta_bar`` and velocity ``v``."""

    a: SpectralField
    v: SpectralField
    t: float = 0.0

    def __post_init__(self):
        _check_compatible(self.a, self.v)

    @property
    def n(self) -> int:
        return self.a.n

    @property
    def length(self) -> float:
        return self.a.length

    def replace(self, **kw) -> "FluidState":
        d = {"a": self.a, "v": self.v, "t": self.t}
        d.update(kw)
        return FluidState(**d)


def grid(n: int, length: float) -> np.ndarray:
    return length * np.arange(n) / n


def lp_norm(values: np.ndarray, dy: float, p: float) -> float | np.ndarray:
    """Rectangle-rule ``L^p`` norm along the last axis."""
    absv = np.abs(values)
    if np.isinf(p):
        return absv.max(axis=-1)
    if p == 2:
        return np.sqrt(dy * np.sum(absv * absv, axis=-1))
    if p == 1:
        return dy * np.sum(absv, axis=-1)
    return (dy * np.sum(absv**p, axis=-1)) ** (1.0 / p)


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product of 2/3-truncated factors, truncated again."""
    _check_compatible(f, g)
    prod = f.dealiased().values * g.dealiased().values
    return SpectralField(prod, f.length).dealiased()


def _check_compatible(f: SpectralField, g: SpectralField) -> None:
    if f.n != g.n or not np.isclose(f.length, g.length, rtol=1e-13, atol=0.0):
        raise ValueError("fields live on different grids")
