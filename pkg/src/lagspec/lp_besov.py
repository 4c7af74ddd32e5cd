"""Discrete homogeneous Littlewood-Paley analysis on the torus.

Ring ``j`` lives on ``3/4 * 2**j <= |xi| <= 8/3 * 2**j`` (angular wavenumber).
The profile is the usual telescoping difference ``chi(xi/2) - chi(xi)`` with a
degree-7 smoothstep for ``chi``; the bank is then renormalized by the sampled
sum so that the partition of unity holds to rounding on every covered mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .field import SpectralField, dealias_mask, lp_norm, wavenumbers

RING_LO = 0.75
RING_HI = 8.0 / 3.0


class UnresolvableRingError(ValueError):
    """Requested dyadic range has rings the grid cannot represent."""


def smoothstep7(t):
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def _chi(r):
    # 1 on [0, 3/4], 0 beyond 4/3
    return 1.0 - smoothstep7((np.abs(r) - 0.75) / (4.0 / 3.0 - 0.75))


def ring_profile(r):
    return _chi(r / 2.0) - _chi(r)


@dataclass(frozen=True, eq=False)
class DyadicFilterBank:
    j_min: int
    j_max: int
    grid_size: int
    domain_length: float
    filters: np.ndarray  # shape (n_rings, N//2 + 1)

    @property
    def js(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    @property
    def xi(self) -> np.ndarray:
        return wavenumbers(self.grid_size, self.domain_length)

    def index(self, j: int) -> int:
        if not self.j_min <= j <= self.j_max:
            raise IndexError(f"ring {j} outside bank range [{self.j_min}, {self.j_max}]")
        return j - self.j_min

    def resolved_band(self) -> np.ndarray:
        """Mask of modes on which the partition of unity is claimed."""
        xi = self.xi
        kc = xi[dealias_mask(self.grid_size)].max()
        lo = (4.0 / 3.0) * 2.0**self.j_min
        hi = min(kc, 1.5 * 2.0**self.j_max)
        return (xi >= lo) & (xi <= hi) & (xi > 0)

    def covered(self) -> np.ndarray:
        return self.filters.sum(axis=0) > 0

    def bernstein_ratio(self) -> float:
        """Measured ``max |xi| / 2**j`` over the support of each filter."""
        ratios = []
        for row, j in zip(self.filters, self.js):
            supp = row > 0
            if supp.any():
                ratios.append(self.xi[supp].max() / 2.0**j)
        return float(max(ratios)) if ratios else 0.0

    def compatible(self, f: SpectralField) -> bool:
        return f.n == self.grid_size and math.isclose(f.length, self.domain_length, rel_tol=1e-12)


def build_filter_bank(n: int, length: float, j_min: int, j_max: int) -> DyadicFilterBank:
    """Sample the dyadic partition on the discrete frequencies of an N-point torus."""
    if j_max < j_min:
        raise ValueError("j_max < j_min")
    xi = wavenumbers(n, length)
    k1 = 2.0 * np.pi / length
    kc = xi[dealias_mask(n)].max()
    if RING_LO * 2.0**j_max > kc:
        raise UnresolvableRingError(
            f"unresolvable dyadic ring: ring {j_max} starts at {RING_LO * 2.0**j_max:g} "
            f"above the dealiased cutoff {kc:g}"
        )
    if RING_HI * 2.0**j_min <= k1:
        raise UnresolvableRingError(
            f"unresolvable dyadic ring: ring {j_min} lies below the fundamental {k1:g}"
        )
    js = np.arange(j_min, j_max + 1)
    raw = ring_profile(xi[None, :] / 2.0 ** js[:, None].astype(float))
    raw[:, 0] = 0.0
    total = raw.sum(axis=0)
    filters = np.divide(raw, total, out=np.zeros_like(raw), where=total > 0)
    return DyadicFilterBank(j_min, j_max, n, float(length), filters)


def default_bank(n: int, length: float) -> DyadicFilterBank:
    """Bank covering every nonzero mode from the fundamental to Nyquist."""
    k1 = 2.0 * np.pi / length
    kc = wavenumbers(n, length)[dealias_mask(n)].max()
    j_min = math.floor(math.log2(k1))
    j_max = math.floor(math.log2(kc / RING_LO))
    return build_filter_bank(n, length, j_min, j_max)


def lp_block(f: SpectralField, j: int, bank: DyadicFilterBank) -> SpectralField:
    return f.with_hat(f.hat * bank.filters[bank.index(j)])


def block_fields(f: SpectralField, bank: DyadicFilterBank) -> np.ndarray:
    """All blocks as real samples, shape ``(n_rings, N)``."""
    _require(f, bank)
    return np.fft.irfft(f.hat[None, :] * bank.filters, n=f.n, axis=-1)


def block_norms(f: SpectralField, bank: DyadicFilterBank, p: float = 2.0) -> np.ndarray:
    """``||Delta_j f||_{L^p}`` for every ring of the bank."""
    if p == 2:
        # Parseval: exact for the rectangle rule on trigonometric polynomials
        w = np.full(f.n // 2 + 1, 2.0)
        w[0] = 1.0
        if f.n % 2 == 0:
            w[-1] = 1.0
        _require(f, bank)
        e = kernels.block_energies(f.hat, bank.filters, w)
        return np.sqrt(e * f.length) / f.n
    return lp_norm(block_fields(f, bank), f.dy, p)


@dataclass(frozen=True)
class BesovSpec:
    p: float = 2.0
    r: float = 1.0
    sigma: float = 0.0
    range: str = "full"
    j0: int = 0
    alpha: float = 1.0

    def __post_init__(self):
        if self.r not in (1, math.inf):
            raise ValueError("summation exponent r must be 1 or inf")
        if self.range not in ("full", "low", "high"):
            raise ValueError(f"unknown frequency range {self.range!r}")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def ring_mask(self, js: np.ndarray) -> np.ndarray:
        shift = math.log2(self.alpha)
        if self.range == "low":
            return js <= self.j0 + 1 + shift + 1e-12
        if self.range == "high":
            return js >= self.j0 + shift - 1e-12
        return np.ones(js.shape, dtype=bool)

    def replace(self, **kw) -> "BesovSpec":
        d = dict(p=self.p, r=self.r, sigma=self.sigma, range=self.range, j0=self.j0, alpha=self.alpha)
        d.update(kw)
        return BesovSpec(**d)


def weighted_sum(per_block: np.ndarray, js: np.ndarray, spec: BesovSpec) -> float | np.ndarray:
    """``l^r`` sum of ``2**(j sigma) * per_block`` over the rings selected by ``spec`` (last axis)."""
    mask = spec.ring_mask(js)
    w = 2.0 ** (spec.sigma * js[mask])
    vals = per_block[..., mask] * w
    if vals.shape[-1] == 0:
        return np.zeros(per_block.shape[:-1]) if per_block.ndim > 1 else 0.0
    if spec.r == 1:
        return vals.sum(axis=-1)
    return vals.max(axis=-1)


def besov_norm(f: SpectralField, spec: BesovSpec, bank: DyadicFilterBank) -> float:
    return float(weighted_sum(block_norms(f, bank, spec.p), bank.js, spec))


def hybrid_norms(f, sigma_low, p_low, sigma_high, p_high, j0, alpha, bank):
    """Low- and high-frequency parts with the one-ring overlap."""
    low = besov_norm(f, BesovSpec(p=p_low, sigma=sigma_low, range="low", j0=j0, alpha=alpha), bank)
    high = besov_norm(f, BesovSpec(p=p_high, sigma=sigma_high, range="high", j0=j0, alpha=alpha), bank)
    return low, high


def frequency_projection(f: SpectralField, bank: DyadicFilterBank, j0: int, alpha: float, part: str):
    """``z^{l,alpha}`` (rings ``j <= j0 + log2 alpha``) or ``z^{h,alpha}`` (the rest)."""
    cut = j0 + math.log2(alpha)
    js = bank.js
    sel = js <= cut + 1e-12 if part == "low" else js > cut + 1e-12
    return f.with_hat(f.hat * bank.filters[sel].sum(axis=0))


@dataclass(frozen=True, eq=False)
class BlockNormHistory:
    """Per-ring ``L^p`` norms sampled at increasing times; ``per_block`` is (n_times, n_rings)."""

    times: np.ndarray
    per_block: np.ndarray
    js: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        pb = np.asarray(self.per_block, dtype=float)
        if pb.ndim == 1:
            pb = pb[None, :]
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "per_block", pb)
        object.__setattr__(self, "js", np.asarray(self.js))
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("history times must be strictly increasing")
        if pb.shape[0] != times.size or pb.shape[1] != self.js.size:
            raise ValueError("per-block array does not match times/rings")

    def __len__(self):
        return self.times.size

    def weighted(self, weights: np.ndarray) -> "BlockNormHistory":
        return BlockNormHistory(self.times, self.per_block * np.asarray(weights)[:, None], self.js, self.p)

    def upto(self, k: int) -> "BlockNormHistory":
        return BlockNormHistory(self.times[: k + 1], self.per_block[: k + 1], self.js, self.p)

    def __add__(self, other: "BlockNormHistory") -> "BlockNormHistory":
        # pairs (a, v) are normed as the sum of the component norms
        return BlockNormHistory(self.times, self.per_block + other.per_block, self.js, self.p)


def time_norm(times: np.ndarray, values: np.ndarray, m: float, running: bool = False):
    """``L^m(0, t)`` norm along axis 0: trapezoid for m in {1, 2}, max for inf."""
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.shape[0] == 0:
        raise ValueError("empty history")
    if np.isinf(m):
        return np.maximum.accumulate(values, axis=0) if running else values.max(axis=0)
    if m not in (1, 2):
        raise ValueError("time exponent must be 1, 2 or inf")
    integrand = values if m == 1 else values * values
    dt = np.diff(times)
    seg = 0.5 * (integrand[1:] + integrand[:-1]) * dt.reshape((-1,) + (1,) * (values.ndim - 1))
    if running:
        cum = np.concatenate([np.zeros((1,) + values.shape[1:]), np.cumsum(seg, axis=0)])
        return cum if m == 1 else np.sqrt(cum)
    total = seg.sum(axis=0)
    return total if m == 1 else np.sqrt(total)


def tilde_norm(history: BlockNormHistory, m: float, spec: BesovSpec, bank=None, running: bool = False):
    """``sum_j 2**(j sigma) ||Delta_j z||_{L^m_t L^p}`` from stored block norms."""
    if len(history) == 0:
        raise ValueError("empty history")
    if bank is not None and not np.array_equal(bank.js, history.js):
        raise ValueError("history rings do not match the bank")
    per_j = time_norm(history.times, history.per_block, m, running=running)
    return weighted_sum(per_j, history.js, spec)


def bony_decompose(f: SpectralField, g: SpectralField, bank: DyadicFilterBank):
    """Paraproducts ``T_f g``, ``T_g f`` and remainder ``R(f, g)``, each dealiased."""
    fb = block_fields(f.dealiased(), bank)
    gb = block_fields(g.dealiased(), bank)
    n = fb.shape[0]
    # low-pass S_{j-1} = sum_{j' <= j-2} Delta_{j'}
    fcum = np.cumsum(fb, axis=0)
    gcum = np.cumsum(gb, axis=0)
    t_fg = np.zeros(f.n)
    t_gf = np.zeros(f.n)
    rem = np.zeros(f.n)
    for k in range(n):
        if k >= 2:
            t_fg += fcum[k - 2] * gb[k]
            t_gf += gcum[k - 2] * fb[k]
        for kk in range(max(0, k - 1), min(n, k + 2)):
            rem += fb[k] * gb[kk]
    out = tuple(SpectralField(x, f.length).dealiased() for x in (t_fg, t_gf, rem))
    return out


def _require(f: SpectralField, bank: DyadicFilterBank) -> None:
    if not bank.compatible(f):
        raise ValueError("field is not resolved on the bank's grid")
