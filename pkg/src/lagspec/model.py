"""Pressure and viscosity laws, normalization, nonlinearities and functionals.

All laws are written in the Lagrangian unknown ``eta`` (specific volume):
``Q(eta) = P(1/eta)`` and ``nu(eta) = mu(1/eta) / eta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels
from .field import SpectralField
from .lp_besov import (
    BesovSpec,
    DyadicFilterBank,
    besov_norm,
    hybrid_norms,
    tilde_norm,
    time_norm,
    weighted_sum,
)

ADMISSIBLE = (0.25, 4.0)


class VacuumError(ValueError):
    """Specific volume reached zero or changed sign."""


class RegimeError(ValueError):
    """State left the perturbative interval ``[eta_bar/4, 4 eta_bar]``."""


@dataclass(frozen=True)
class ScalarLaw:
    """A smooth scalar law with its first derivative.

    ``kind`` tags the built-in families so that the normalized remainder can be
    evaluated without cancellation (and on the compiled path for gamma laws).
    """

    fn: Callable
    deriv: Callable
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.fn(x)


def affine_pressure(slope: float, eta_bar: float = 1.0) -> ScalarLaw:
    """``Q(eta) = -slope (eta - eta_bar)``."""
    return ScalarLaw(
        lambda e: -slope * (np.asarray(e) - eta_bar),
        lambda e: -slope * np.ones_like(np.asarray(e, dtype=float)),
        "affine",
        {"slope": slope, "eta_bar": eta_bar},
    )


def gamma_pressure(gamma: float = 1.4, A: float = 1.0, eta_bar: float = 1.0) -> ScalarLaw:
    """``P(rho) = A rho**gamma`` shifted so that ``Q(eta_bar) = 0``."""
    return ScalarLaw(
        lambda e: A * np.asarray(e, dtype=float) ** (-gamma) - A * eta_bar ** (-gamma),
        lambda e: -A * gamma * np.asarray(e, dtype=float) ** (-gamma - 1.0),
        "gamma",
        {"gamma": gamma, "A": A, "eta_bar": eta_bar},
    )


def eulerian_constant_viscosity(mu_bar: float) -> ScalarLaw:
    """Constant Eulerian viscosity ``mu`` gives ``nu(eta) = mu / eta``."""
    return ScalarLaw(
        lambda e: mu_bar / np.asarray(e, dtype=float),
        lambda e: -mu_bar / np.asarray(e, dtype=float) ** 2,
        "eulerian",
        {"mu_bar": mu_bar},
    )


def lagrangian_constant_viscosity(nu_bar: float) -> ScalarLaw:
    return ScalarLaw(
        lambda e: nu_bar * np.ones_like(np.asarray(e, dtype=float)),
        lambda e: np.zeros_like(np.asarray(e, dtype=float)),
        "lagrangian",
        {"nu_bar": nu_bar},
    )


@dataclass(frozen=True)
class ModelParams:
    eta_bar: float
    Ma: float
    nu_bar: float
    pressure_law: ScalarLaw
    viscosity_law: ScalarLaw

    @property
    def nu_check(self) -> float:
        return self.Ma * self.nu_bar

    @property
    def is_normalized(self) -> bool:
        return self.eta_bar == 1.0 and self.Ma == 1.0 and self.nu_bar == 1.0

    # normalized laws
    def q_norm(self, x):
        x = np.asarray(x, dtype=float)
        return self.Ma**2 / self.eta_bar * (self.pressure_law(self.eta_bar * x) - self._q0)

    def q_norm_deriv(self, x):
        return self.Ma**2 * self.pressure_law.deriv(self.eta_bar * np.asarray(x, dtype=float))

    def nu_norm(self, x):
        return self.viscosity_law(self.eta_bar * np.asarray(x, dtype=float)) / self.nu_bar

    def nu_norm_deriv(self, x):
        return self.eta_bar * self.viscosity_law.deriv(self.eta_bar * np.asarray(x, dtype=float)) / self.nu_bar

    @property
    def _q0(self) -> float:
        return float(self.pressure_law(self.eta_bar))

    def q_remainder(self, a):
        """``Q_norm(1 + a) + a``, quadratic in ``a``."""
        a = np.asarray(a, dtype=float)
        kind = self.pressure_law.kind
        if kind == "affine":
            return np.zeros_like(a)
        if kind == "gamma":
            return kernels.gamma_remainder(a, self.pressure_law.params["gamma"])
        return self.q_norm(1.0 + a) + a

    def nu_remainder(self, a):
        """``nu_norm(1 + a) - 1``."""
        a = np.asarray(a, dtype=float)
        kind = self.viscosity_law.kind
        if kind == "lagrangian":
            return np.zeros_like(a)
        if kind == "eulerian":
            return -a / (1.0 + a)
        return self.nu_norm(1.0 + a) - 1.0

    def with_nu_bar(self, nu_bar: float) -> "ModelParams":
        """Same law shapes, viscosity rescaled so that ``nu(eta_bar) = nu_bar``."""
        factor = nu_bar / self.nu_bar
        vl = self.viscosity_law
        law = ScalarLaw(
            lambda e, f=vl.fn: factor * f(e),
            lambda e, d=vl.deriv: factor * d(e),
            vl.kind,
            {k: (v * factor if k in ("mu_bar", "nu_bar") else v) for k, v in vl.params.items()},
        )
        return replace(self, nu_bar=float(nu_bar), viscosity_law=law)

    def diffusive(self) -> "ModelParams":
        """Parameters under which the diffusively rescaled system is the plain one.

        That system is the original one with pressure ``nu_bar^2 Q`` and
        viscosity ``nu_bar nu``, hence ``Ma -> Ma / nu_bar`` and
        ``nu_bar -> nu_bar^2``; the normalized laws are unchanged.
        """
        nb = self.nu_bar
        pl, vl = self.pressure_law, self.viscosity_law
        pressure = ScalarLaw(lambda e, f=pl.fn: nb**2 * f(e), lambda e, d=pl.deriv: nb**2 * d(e),
                             pl.kind, pl.params)
        viscosity = ScalarLaw(lambda e, f=vl.fn: nb * f(e), lambda e, d=vl.deriv: nb * d(e),
                              vl.kind, vl.params)
        return replace(self, Ma=self.Ma / nb, nu_bar=nb * nb,
                       pressure_law=pressure, viscosity_law=viscosity)

    def limit_rhs(self, theta):
        """``nu_bar (nu^-1 Q)(theta)``, right-hand side of the large-viscosity ODE."""
        theta = np.asarray(theta, dtype=float)
        return self.nu_bar * (self.pressure_law(theta) - self._q0) / self.viscosity_law(theta)

    def normalized(self) -> "ModelParams":
        """Parameters of the rescaled problem (``eta_bar = Ma = nu_bar = 1``)."""
        return normalize(
            ScalarLaw(self.q_norm, self.q_norm_deriv, self.pressure_law.kind, self.pressure_law.params),
            ScalarLaw(self.nu_norm, self.nu_norm_deriv, self.viscosity_law.kind, self.viscosity_law.params),
            1.0,
        )


def normalize(pressure_law: ScalarLaw, viscosity_law: ScalarLaw, eta_bar: float) -> ModelParams:
    """Compute ``Ma``, ``nu_bar`` and the normalized laws from raw laws."""
    if not eta_bar > 0:
        raise ValueError("reference specific volume must be positive")
    dq = float(pressure_law.deriv(eta_bar))
    if not dq < 0:
        raise ValueError(f"unstable reference state: Q'(eta_bar) = {dq:g} >= 0")
    nu_bar = float(viscosity_law(eta_bar))
    if not nu_bar > 0:
        raise ValueError(f"nonpositive viscosity: nu(eta_bar) = {nu_bar:g}")
    return ModelParams(float(eta_bar), 1.0 / math.sqrt(-dq), nu_bar, pressure_law, viscosity_law)


def check_admissible(a: np.ndarray, where: str = "") -> None:
    """Raise unless ``1 + a`` stays in the admissible interval (normalized units)."""
    amin = float(np.min(a)) + 1.0
    amax = float(np.max(a)) + 1.0
    if amin <= 0:
        raise VacuumError(f"vacuum/negative specific volume{where}: min(1+a) = {amin:g}")
    if amin < ADMISSIBLE[0] or amax > ADMISSIBLE[1]:
        raise RegimeError(f"state left perturbative regime{where}: 1+a in [{amin:g}, {amax:g}]")


def eval_aK(a: SpectralField, params: ModelParams) -> SpectralField:
    """The product ``a K(a) = -(Q_norm(1+a) + a)``, dealiased."""
    check_admissible(a.values)
    return a.with_values(-params.q_remainder(a.values)).dealiased()


def eval_L(a: SpectralField, params: ModelParams) -> SpectralField:
    """``L(a) = nu_norm(1+a) - 1``, dealiased."""
    check_admissible(a.values)
    return a.with_values(params.nu_remainder(a.values)).dealiased()


def smallness_lhs(a0: SpectralField, v0: SpectralField, params: ModelParams, p: float,
                  bank: DyadicFilterBank, j0: int = 0) -> float:
    """Left-hand side of the global-existence smallness condition."""
    alpha = 1.0 / params.nu_check
    a_lo, a_hi = hybrid_norms(a0, -0.5, 2.0, 1.0 / p, p, j0, alpha, bank)
    v_lo, v_hi = hybrid_norms(v0, -0.5, 2.0, -1.0 + 1.0 / p, p, j0, alpha, bank)
    return a_lo / params.Ma + params.nu_bar * a_hi + v_lo + v_hi


def data_functional(a0, v0, p, bank, j0=0, alpha=1.0) -> float:
    """``X_{p,0}``: low ``B^{-1/2}_{2,1}`` of (a0, v0) plus high ``B^{-1+1/p}_{p,1}`` of (a0_y, v0)."""
    lo = BesovSpec(p=2, sigma=-0.5, range="low", j0=j0, alpha=alpha)
    hi = BesovSpec(p=p, sigma=-1.0 + 1.0 / p, range="high", j0=j0, alpha=alpha)
    return (besov_norm(a0, lo, bank) + besov_norm(v0, lo, bank)
            + besov_norm(a0.derivative(), hi, bank) + besov_norm(v0, hi, bank))


def decay_data_functional(a0, v0, bank) -> float:
    """Data functional ``X_{2,0}`` that controls the decay estimate (full-range norms)."""
    s = BesovSpec(p=2, sigma=-0.5)
    return besov_norm(a0, s, bank) + besov_norm(a0, s.replace(sigma=0.5), bank) + besov_norm(v0, s, bank)


def solution_functional(hist: dict, p: float, j0: int = 0, alpha: float = 1.0) -> np.ndarray:
    """Running ``X_p(t)`` from block histories keyed ``(name, p)``.

    Needs ``a``, ``v`` at p=2 and ``a_y``, ``v``, ``v_yy``, ``v_t`` at ``p``.
    """
    lo = BesovSpec(p=2, sigma=-0.5, range="low", j0=j0, alpha=alpha)
    hi = BesovSpec(p=p, sigma=-1.0 + 1.0 / p, range="high", j0=j0, alpha=alpha)
    ab = hist[("a", 2.0)] + hist[("v", 2.0)]
    hb = hist[("a_y", p)] + hist[("v", p)]
    sup_part = tilde_norm(ab, math.inf, lo, running=True) + tilde_norm(hb, math.inf, hi, running=True)
    js = ab.js
    inst = (weighted_sum(ab.per_block, js, lo.replace(sigma=1.5))
            + weighted_sum(hist[("a_y", p)].per_block, js, hi)
            + weighted_sum(hist[("v_yy", p)].per_block, js, hi)
            + weighted_sum(hist[("v_t", p)].per_block, js, hi))
    return sup_part + time_norm(ab.times, inst, 1, running=True)


def japanese(t):
    return np.sqrt(1.0 + np.asarray(t, dtype=float) ** 2)


def decay_functionals(traj, bank=None, j0: int | None = None):
    """Running ``(D_low, D_high_a, D_high_v)`` along a trajectory (p = 2, alpha = 1)."""
    hist = traj.block_history
    if not hist or len(traj.times) == 0:
        raise ValueError("empty trajectory")
    if j0 is None:
        j0 = traj.j0
    t = traj.times
    ha = hist[("a", 2.0)]
    hv = hist[("v", 2.0)]
    w1 = japanese(t)
    pair = ha.weighted(w1) + hv.weighted(w1)
    lo = BesovSpec(p=2, sigma=1.5, range="low", j0=j0)
    d_low = tilde_norm(pair, math.inf, lo, running=True) + tilde_norm(pair, 2, lo.replace(sigma=2.5), running=True)
    hi = BesovSpec(p=2, sigma=0.5, range="high", j0=j0)
    d_ha = tilde_norm(ha.weighted(w1**1.5), math.inf, hi, running=True)
    d_hv = tilde_norm(hv.weighted(t * np.sqrt(w1)), math.inf, hi.replace(sigma=1.5), running=True)
    return d_low, d_ha, d_hv
