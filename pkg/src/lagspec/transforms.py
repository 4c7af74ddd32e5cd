"""Eulerian <-> mass-Lagrangian coordinates, the two rescalings, effective velocity.

Both coordinate changes are the same operation: given a positive periodic
weight ``f`` on ``[0, D)`` with integral ``I``, build ``Phi(s) = int_0^s f``,
invert it on a uniform grid of ``[0, I)`` and resample fields there. The map
is evaluated spectrally (linear part plus zero-mean antiderivative); the
inverse starts from a monotone cubic interpolant and is polished by Newton
iterations on the exact spectral map, so resampling is spectrally accurate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .field import FluidState, SpectralField, grid

_CHUNK = 1 << 22


@dataclass(frozen=True, eq=False)
class EulerianState:
    """Density and velocity on ``[0, L_x)``."""

    rho: SpectralField
    u: SpectralField
    t: float = 0.0

    def __post_init__(self):
        if self.rho.n != self.u.n or not np.isclose(self.rho.length, self.u.length):
            raise ValueError("fields live on different grids")
        if np.min(self.rho.values) <= 0:
            raise ValueError("nonpositive density")

    @property
    def length(self) -> float:
        return self.rho.length

    @property
    def mass(self) -> float:
        return self.rho.integral()


@dataclass(frozen=True, eq=False)
class CoordinateMap:
    """Samples of ``y(x)`` on the x-grid and ``x(y)`` on the y-grid."""

    x: np.ndarray
    y_of_x: np.ndarray
    y: np.ndarray
    x_of_y: np.ndarray
    length_x: float
    mass: float

    def __post_init__(self):
        if np.any(np.diff(self.y_of_x) <= 0) or np.any(np.diff(self.x_of_y) <= 0):
            raise ValueError("coordinate map is not strictly increasing")


def evaluate(f: SpectralField, pts: np.ndarray) -> np.ndarray:
    """Trigonometric interpolant of ``f`` at arbitrary points."""
    pts = np.asarray(pts, dtype=float)
    n = f.n
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    c = w * f.hat / n
    xi = f.xi
    out = np.empty(pts.shape)
    flat = pts.ravel()
    step = max(1, _CHUNK // xi.size)
    res = out.ravel()
    for i in range(0, flat.size, step):
        ph = np.exp(1j * np.outer(flat[i:i + step], xi))
        res[i:i + step] = (ph @ c).real
    return res.reshape(pts.shape)


def _cumulative(f: SpectralField):
    """``Phi(s) = int_0^s f`` as (slope, zero-mean antiderivative, offset)."""
    anti = f.antiderivative()
    return f.mean, anti, evaluate(anti, np.zeros(1))[0]


def _phi(slope, anti, offset, s):
    return slope * s + evaluate(anti, s) - offset


def _invert(f: SpectralField, n_out: int):
    """Solve ``Phi(s_k) = k I / n_out`` for the uniform target grid."""
    slope, anti, offset = _cumulative(f)
    total = slope * f.length
    s_grid = f.y
    phi_grid = slope * s_grid + anti.values - offset
    target = grid(n_out, total)
    knots_s = np.append(s_grid, f.length)
    knots_p = np.append(phi_grid, total)
    if np.any(np.diff(knots_p) <= 0):
        raise ValueError("coordinate map is not strictly increasing")
    s = PchipInterpolator(knots_p, knots_s)(target)
    for _ in range(50):
        r = _phi(slope, anti, offset, s) - target
        ds = r / evaluate(f, s)
        s = s - ds
        if np.max(np.abs(ds)) < 1e-15 * f.length:
            break
    return s, phi_grid, target, total


def to_lagrangian(state: EulerianState, n_y: int):
    """Return ``(eta, v, map)`` on the Lagrangian circle of length ``M``."""
    if np.min(state.rho.values) <= 0:
        raise ValueError("nonpositive density")
    x_of_y, y_of_x, y, mass = _invert(state.rho, n_y)
    eta = SpectralField(1.0 / evaluate(state.rho, x_of_y), mass)
    v = SpectralField(evaluate(state.u, x_of_y), mass)
    cmap = CoordinateMap(state.rho.y, y_of_x, y, x_of_y, state.length, mass)
    return eta, v, cmap


def to_eulerian(eta: SpectralField, v: SpectralField, mass: float | None = None,
                cmap: CoordinateMap | None = None) -> EulerianState:
    """Inverse of :func:`to_lagrangian`; the Eulerian grid has ``eta.n`` points.

    ``mass`` (or ``cmap.mass``) is checked against the circumference of ``eta``.
    """
    if np.min(eta.values) <= 0:
        raise ValueError("nonpositive specific volume")
    expected = cmap.mass if cmap is not None else mass
    if expected is not None and not math.isclose(expected, eta.length, rel_tol=1e-12):
        raise ValueError("mass does not match the Lagrangian circumference")
    y_of_x, _, _, length_x = _invert(eta, eta.n)
    rho = SpectralField(1.0 / evaluate(eta, y_of_x), length_x)
    u = SpectralField(evaluate(v, y_of_x), length_x)
    return EulerianState(rho, u)


def _tile(f: SpectralField, k: int) -> SpectralField:
    return SpectralField(np.tile(f.values, k), f.length * k)


def rescale_normalize(state: FluidState, params, direction: str = "forward",
                      target_length: float | None = None) -> FluidState:
    """Map a physical perturbation to the normalized variables and back.

    Forward: ``a_n = a / eta_bar``, ``v_n = Ma v / eta_bar`` on a circle of
    length ``Y L`` at time ``T t`` with ``T = Ma^-2 nu_bar^-1`` and
    ``Y = Ma^-1 nu_bar^-1``. The dilation only relabels the grid, so it is
    exact for any ``Y``. With ``target_length`` the output is periodically
    tiled up to that length, which must be a power-of-two multiple.
    """
    T = params.Ma**-2 / params.nu_bar
    Y = 1.0 / (params.Ma * params.nu_bar)
    if direction == "forward":
        amp_a, amp_v, fl, ft = 1.0 / params.eta_bar, params.Ma / params.eta_bar, Y, T
    elif direction == "backward":
        amp_a, amp_v, fl, ft = params.eta_bar, params.eta_bar / params.Ma, 1.0 / Y, 1.0 / T
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    length = state.length * fl
    a = SpectralField(state.a.values * amp_a, length)
    v = SpectralField(state.v.values * amp_v, length)
    if target_length is not None:
        ratio = target_length / length
        k = int(round(ratio))
        if k < 1 or not math.isclose(ratio, k, rel_tol=1e-12) or k & (k - 1):
            raise ValueError(f"incompatible grid ratio {ratio:g}")
        if k > 1:
            a, v = _tile(a, k), _tile(v, k)
    return FluidState(a, v, state.t * ft)


def diffusive_rescale(state: FluidState, nu_bar: float, direction: str = "forward") -> FluidState:
    """Forward: ``(eta, v)(t) -> (eta, nu_bar v)(t / nu_bar)``; space untouched."""
    if not nu_bar > 0:
        raise ValueError("nu_bar must be positive")
    if direction == "forward":
        fv, ft = nu_bar, 1.0 / nu_bar
    elif direction == "backward":
        fv, ft = 1.0 / nu_bar, nu_bar
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    return FluidState(state.a, state.v * fv, state.t * ft)


def effective_velocity(a: SpectralField, v: SpectralField, tol: float = 1e-10) -> SpectralField:
    """``w = v + A`` with ``A`` the zero-mean antiderivative of ``a``."""
    if abs(a.mean) > tol * max(1.0, float(np.max(np.abs(a.values)))):
        raise ValueError(f"antiderivative not periodic: mean(a) = {a.mean:g}")
    return v + a.antiderivative()
