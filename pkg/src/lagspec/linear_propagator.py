"""Exact Fourier-mode solution of the linearized system

    a_t + alpha Lambda u = 0,    u_t - mu Delta u - beta Lambda a = 0,

with ``Lambda = |D|``. For a single mode the symbol matrix acting on
``(a_hat, u_hat)`` is ``A = [[0, -alpha|xi|], [beta|xi|, -mu xi^2]]``.

In one dimension ``u = Lambda^{-1} v_y``, i.e. ``u_hat = i sgn(xi) v_hat``.
The normalized Lagrangian system corresponds to ``alpha = beta = -1, mu = 1``.

The matrix exponential is evaluated as

    exp(At) = exp(-s t) [C(z2) I + t S(z2) (A + s I)],
    s = mu xi^2 / 2,  z2 = t^2 (s^2 - alpha beta xi^2),

where ``C(z2) = cosh(sqrt z2)`` and ``S(z2) = sinh(sqrt z2)/sqrt z2`` are entire
in ``z2`` (cos / sinc on the oscillatory side). No ``1/R`` factor appears, so
the degenerate point needs no special pleading beyond a short Taylor series.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import kernels
from .field import FluidState, SpectralField

DEGENERATE_TOL = 1e-8
_SERIES_Z2 = 1e-2


@dataclass(frozen=True)
class LinearParams:
    alpha: float
    beta: float
    mu: float

    def __post_init__(self):
        if self.alpha == 0 or self.beta == 0 or np.sign(self.alpha) != np.sign(self.beta):
            raise ValueError("need sgn(alpha) = sgn(beta) != 0")
        if not self.mu > 0:
            raise ValueError("need mu > 0")

    @classmethod
    def normalized(cls) -> "LinearParams":
        return cls(-1.0, -1.0, 1.0)

    @classmethod
    def physical(cls, Ma: float, nu_bar: float) -> "LinearParams":
        """Linearization of the unscaled Lagrangian system."""
        return cls(-1.0, -Ma**-2, nu_bar)

    @classmethod
    def diffusive(cls, Ma: float, nu_bar: float) -> "LinearParams":
        """Linearization of the diffusively rescaled system."""
        return cls(-1.0, -Ma**-2 * nu_bar**2, nu_bar**2)

    @classmethod
    def from_model(cls, params, variant: str = "normalized") -> "LinearParams":
        if variant == "normalized":
            return cls.normalized()
        if variant == "physical":
            return cls.physical(params.Ma, params.nu_bar)
        if variant == "diffusive":
            return cls.diffusive(params.Ma, params.nu_bar)
        raise ValueError(f"unknown variant {variant!r}")

    @property
    def critical_xi(self) -> float:
        """``|xi|`` at which the two branches merge."""
        return 2.0 * math.sqrt(self.alpha * self.beta) / self.mu

    def symbol(self, xi: float) -> np.ndarray:
        k = abs(xi)
        return np.array([[0.0, -self.alpha * k], [self.beta * k, -self.mu * k * k]])


@dataclass(frozen=True)
class ModeSolution:
    xi: float
    regime: str
    lambda_plus: complex
    lambda_minus: complex
    R: complex


def _regime(xi, p: LinearParams):
    r2 = 1.0 - 4.0 * p.alpha * p.beta / (p.mu**2 * xi**2)
    return r2, np.where(np.abs(r2) < DEGENERATE_TOL, "degenerate",
                        np.where(r2 > 0, "real", "oscillatory"))


def mode_spectrum(xi: float, params: LinearParams) -> ModeSolution:
    """Eigenvalues ``lambda^pm = -(mu xi^2/2)(1 pm R)`` and the regime label."""
    if xi == 0:
        raise ValueError("zero mode has no eigen-decomposition; means are conserved")
    r2, regime = _regime(float(xi), params)
    R = complex(np.sqrt(complex(r2)))
    half = params.mu * xi * xi / 2.0
    lam_p = -half * (1 + R)
    # 1 - R cancels for large |xi|; take the small root from the product instead
    lam_m = params.alpha * params.beta * xi * xi / lam_p if r2 > 0 else -half * (1 - R)
    return ModeSolution(float(xi), str(regime), lam_p, lam_m, R)


def _cosh_sinhc(z2):
    """``cosh(sqrt z2)`` and ``sinh(sqrt z2)/sqrt z2`` for real ``z2`` of any sign."""
    z2 = np.atleast_1d(np.asarray(z2, dtype=float))
    c = np.empty_like(z2)
    s = np.empty_like(z2)
    small = np.abs(z2) < _SERIES_Z2
    pos = (z2 > 0) & ~small
    neg = (z2 < 0) & ~small
    zs = z2[small]
    # Taylor series, error below (1e-2)^6 / 12!
    c[small] = 1 + zs / 2 * (1 + zs / 12 * (1 + zs / 30 * (1 + zs / 56 * (1 + zs / 90))))
    s[small] = 1 + zs / 6 * (1 + zs / 20 * (1 + zs / 42 * (1 + zs / 72 * (1 + zs / 110))))
    z = np.sqrt(z2[pos])
    with np.errstate(over="ignore"):
        c[pos] = np.cosh(z)
        s[pos] = np.sinh(z) / z
    w = np.sqrt(-z2[neg])
    c[neg] = np.cos(w)
    s[neg] = np.sin(w) / w
    return c, s, pos


def mode_matrix(xi, t, params: LinearParams):
    """Entries ``(E00, E01, E10, E11)`` of ``exp(A t)`` acting on ``(a_hat, u_hat)``.

    Broadcasts over ``xi`` (nonzero) and ``t`` (nonnegative).
    """
    xi, t = _flat_args(xi, t)
    shape = xi.shape
    xi, t = xi.ravel(), t.ravel()
    p = params
    s = p.mu * xi * xi / 2.0
    st = s * t
    z2 = t * t * (s * s - p.alpha * p.beta * xi * xi)
    c, sc, big = _cosh_sinhc(z2)
    damp = np.exp(-st)
    with np.errstate(invalid="ignore", over="ignore"):
        ec = damp * c
        es = damp * t * sc
    # large positive z: combine exponentials so that cosh never overflows
    if np.any(big):
        z = np.sqrt(z2[big])
        ep = np.exp(z - st[big])
        em = np.exp(-z - st[big])
        ec[big] = 0.5 * (ep + em)
        es[big] = t[big] * 0.5 * (ep - em) / z
    e00 = ec + es * s
    e01 = es * (-p.alpha * xi)
    e10 = es * (p.beta * xi)
    e11 = ec + es * (s - p.mu * xi * xi)
    return tuple(e.reshape(shape) for e in (e00, e01, e10, e11))


def _flat_args(xi, t):
    xi, t = np.broadcast_arrays(np.abs(np.asarray(xi, dtype=float)), np.asarray(t, dtype=float))
    if np.any(xi == 0):
        raise ValueError("zero mode has no eigen-decomposition; means are conserved")
    if np.any(t < 0):
        raise ValueError("negative time")
    return xi, t


def propagate_mode(a0_hat, u0_hat, xi, t, params: LinearParams):
    """Exact ``(a_hat(t), u_hat(t))`` for one mode (or broadcast arrays)."""
    e00, e01, e10, e11 = mode_matrix(xi, t, params)
    a = e00 * a0_hat + e01 * u0_hat
    u = e10 * a0_hat + e11 * u0_hat
    if np.ndim(a) == 0:
        return complex(a), complex(u)
    return a, u


def field_matrix(xi, t, params: LinearParams):
    """``exp(A t)`` in ``(a_hat, v_hat)`` variables on the rfft half-line.

    Zero mode: identity. The Nyquist entry (if ``nyquist``) carries no
    derivative coupling, so ``a`` is frozen and ``v`` diffuses.
    """
    xi = np.asarray(xi, dtype=float)
    out = [np.ones(xi.shape, complex), np.zeros(xi.shape, complex),
           np.zeros(xi.shape, complex), np.ones(xi.shape, complex)]
    nz = xi != 0
    e00, e01, e10, e11 = mode_matrix(xi[nz], t, params)
    # u_hat = i v_hat for xi > 0
    out[0][nz] = e00
    out[1][nz] = 1j * e01
    out[2][nz] = -1j * e10
    out[3][nz] = e11
    return tuple(out)


def _field_xi(n: int, length: float):
    xi = 2.0 * np.pi / length * np.arange(n // 2 + 1)
    return xi


def _fix_nyquist(coeffs, xi, n, t, mu):
    if n % 2 == 0:
        e00, e01, e10, e11 = coeffs
        e00[-1], e01[-1], e10[-1] = 1.0, 0.0, 0.0
        e11[-1] = math.exp(-mu * xi[-1] ** 2 * t)
    return coeffs


def state_matrix(n: int, length: float, t: float, params: LinearParams):
    xi = _field_xi(n, length)
    return _fix_nyquist(field_matrix(xi, t, params), xi, n, t, params.mu)


def propagate_field(state: FluidState, t: float, params: LinearParams, bank=None) -> FluidState:
    """Apply the exact linear flow for time ``t`` to every Fourier mode.

    ``bank`` is accepted for interface symmetry and only checked for grid
    compatibility.
    """
    if t < 0:
        raise ValueError("negative time")
    if bank is not None and not bank.compatible(state.a):
        raise ValueError("filter bank built for a different grid")
    e = state_matrix(state.n, state.length, t, params)
    a_hat, v_hat = kernels.etd_apply(*e, state.a.hat, state.v.hat)
    return FluidState(state.a.with_hat(a_hat), state.v.with_hat(v_hat), state.t + t)


def effective_flux_hat(w0y_hat, v0y_hat, xi, t, params: LinearParams):
    """Closed form of ``w_y = v_y + c a`` with ``c = beta / (alpha mu)``.

    In the diffusive scaling ``c = Ma^-2`` and this is

        w_y = 1/2 [(1 - 1/R) e^{t lambda^-} + (1 + 1/R) e^{t lambda^+}] w0_y
              + (e^{t lambda^-} - e^{t lambda^+}) / (R nu_check^2 xi^2) v0_y,

    written here through ``cosh`` and ``sinh(z)/z`` to stay finite at ``R = 0``.
    """
    xi, t = _flat_args(xi, t)
    p = params
    s = p.mu * xi * xi / 2.0
    st = s * t
    z2 = t * t * (s * s - p.alpha * p.beta * xi * xi)
    c, sc, _ = _cosh_sinhc(np.atleast_1d(z2))
    c, sc = c.reshape(z2.shape), sc.reshape(z2.shape)
    damp = np.exp(-st)
    nu_check2 = p.mu**2 / (p.alpha * p.beta)
    # sinh(z)/R = st * sinhc(z)
    coef_w = damp * (c - st * sc)
    coef_v = 2.0 * damp * st * sc / (nu_check2 * xi * xi)
    out = coef_w * w0y_hat + coef_v * v0y_hat
    return complex(out) if np.ndim(out) == 0 else out


def overdamped_mode(a0_hat, v0_hat, xi, t, Ma: float, nu_bar: float):
    """Large-viscosity asymptotics of one mode in the unscaled system."""
    slow = np.exp(-t / (nu_bar * Ma**2))
    nu_check = Ma * nu_bar
    a = slow * (a0_hat + 1j * v0_hat / (nu_bar * xi))
    v = (np.exp(-t * nu_bar * xi * xi) * v0_hat
         + slow * (1j * a0_hat / (nu_bar * Ma**2 * xi) + v0_hat / (nu_check**2 * xi * xi)))
    return a, v


def etd_coefficients(n: int, length: float, h: float, params: LinearParams):
    """Per-mode ETD data for step ``h`` in ``(a_hat, v_hat)`` variables.

    Returns ``(E, P1, P2)``: ``E`` the four entries of ``exp(hA)``; ``P1`` and
    ``P2`` the columns ``h phi_1(hA) e_v`` and ``h phi_2(hA) e_v`` that multiply
    a forcing acting on the ``v`` equation only.
    """
    xi = _field_xi(n, length)
    E = _fix_nyquist(field_matrix(xi, h, params), xi, n, h, params.mu)
    m = xi.size
    P1 = [np.zeros(m, complex), np.zeros(m, complex)]
    P2 = [np.zeros(m, complex), np.zeros(m, complex)]
    # zero mode: A = 0, phi_1 = 1, phi_2 = 1/2 (the forcing has no mean anyway)
    P1[1][0] = h
    P2[1][0] = h / 2
    nz = np.arange(1, m)
    if n % 2 == 0:
        nz = nz[:-1]
        k2 = params.mu * xi[-1] ** 2 * h
        P1[1][-1] = h * _phi1_scalar(-k2)
        P2[1][-1] = h * _phi2_scalar(-k2)
    if nz.size:
        k = xi[nz]
        aug = np.zeros((nz.size, 6, 6))
        aug[:, 0, 1] = -params.alpha * k * h
        aug[:, 1, 0] = params.beta * k * h
        aug[:, 1, 1] = -params.mu * k * k * h
        aug[:, 0, 2] = aug[:, 1, 3] = 1.0
        aug[:, 2, 4] = aug[:, 3, 5] = 1.0
        ex = expm(aug)
        phi1 = ex[:, 0:2, 2:4]
        phi2 = ex[:, 0:2, 4:6]
        # column e_v in (a, v) variables: u = i v, so the (a,u) column 1 times i,
        # then the a-row keeps it and the v-row is multiplied by -i
        P1[0][nz] = h * 1j * phi1[:, 0, 1]
        P1[1][nz] = h * phi1[:, 1, 1]
        P2[0][nz] = h * 1j * phi2[:, 0, 1]
        P2[1][nz] = h * phi2[:, 1, 1]
    return E, tuple(P1), tuple(P2)


def _phi1_scalar(x: float) -> float:
    return 1.0 + x / 2 if abs(x) < 1e-8 else math.expm1(x) / x


def _phi2_scalar(x: float) -> float:
    return 0.5 + x / 6 if abs(x) < 1e-5 else (math.expm1(x) - x) / (x * x)


def linear_state(a0: SpectralField, v0: SpectralField, times, params: LinearParams):
    """Exact linear solution at each time in ``times``."""
    s0 = FluidState(a0, v0)
    return [propagate_field(s0, float(t), params) for t in times]
