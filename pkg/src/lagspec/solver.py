"""Exponential time differencing for the normalized Lagrangian system

    a_t - v_y = 0,   v_t - a_y - v_yy = g = (a K(a))_y + (L(a) v_y)_y,

plus its diffusively rescaled variant, the Picard construction, the
pointwise large-viscosity limit ODE and the diagnostic monitors.

The linear part is integrated exactly with the closed-form propagator, so
stiffness from large viscosities never restricts the step size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .field import FluidState, SpectralField, dealias_mask, lp_norm, odd_derivative_symbol
from .linear_propagator import LinearParams, etd_coefficients, state_matrix
from .lp_besov import BlockNormHistory, block_norms, default_bank, lp_block
from .model import ADMISSIBLE, ModelParams, RegimeError, check_admissible, solution_functional
from .transforms import effective_velocity, rescale_normalize

SCHEMES = ("etd1", "etd2")
VARIANTS = ("normalized", "diffusive")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "etd2"
    dealias: bool = True
    snapshot_stride: int = 1
    variant: str = "normalized"
    output_times: tuple | None = None
    nonlinear: bool = True
    track_p: tuple = (2.0,)
    j0: int = 0
    record_blocks: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be a positive integer")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.output_times is not None:
            ts = np.asarray(self.output_times, dtype=float)
            if ts.ndim != 1 or np.any(np.diff(ts) <= 0) or np.any(ts < 0) or ts.size == 0:
                raise ValueError("output_times must be increasing and nonnegative")
            object.__setattr__(self, "output_times", tuple(float(t) for t in ts))

    def snapshot_times(self) -> np.ndarray:
        if self.output_times is not None:
            ts = np.asarray(self.output_times)
            return ts if ts[0] == 0 else np.concatenate([[0.0], ts])
        every = self.snapshot_stride * self.dt
        k = int(math.floor(self.t_end / every * (1 + 1e-12)))
        ts = every * np.arange(k + 1)
        if self.t_end - ts[-1] > 1e-12 * max(1.0, self.t_end):
            ts = np.append(ts, self.t_end)
        return ts


@dataclass(eq=False)
class Trajectory:
    """Snapshots in the caller's variables plus per-block norm histories."""

    states: list
    times: np.ndarray
    block_history: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    j0: int = 0
    alpha: float = 1.0
    params: ModelParams | None = None
    config: SolverConfig | None = None
    bank: object = None

    def __len__(self):
        return len(self.states)

    def a_values(self) -> np.ndarray:
        return np.array([s.a.values for s in self.states])

    def v_values(self) -> np.ndarray:
        return np.array([s.v.values for s in self.states])


# --------------------------------------------------------------------------
# nonlinearity and stepping in normalized variables


class _Nonlinearity:
    """``g_hat`` on the rfft half-line for normalized fields."""

    def __init__(self, n: int, length: float, params: ModelParams, dealias: bool, enabled: bool):
        self.n = n
        self.params = params
        self.mask = dealias_mask(n) if dealias else np.ones(n // 2 + 1, bool)
        self.dk = odd_derivative_symbol(n, length)
        self.enabled = enabled and not (params.pressure_law.kind == "affine"
                                        and params.viscosity_law.kind == "lagrangian")

    def __call__(self, a_hat, v_hat, t=0.0):
        if not self.enabled:
            return np.zeros_like(a_hat)
        m = self.mask
        a = np.fft.irfft(np.where(m, a_hat, 0.0), n=self.n)
        check_admissible(a, f" at t = {t:.6g}")
        vy = np.fft.irfft(np.where(m, self.dk * v_hat, 0.0), n=self.n)
        flux = -self.params.q_remainder(a) + self.params.nu_remainder(a) * vy
        return self.dk * np.where(m, np.fft.rfft(flux), 0.0)


@lru_cache(maxsize=64)
def _coefficients(n: int, length: float, h: float, lin: LinearParams):
    return etd_coefficients(n, length, h, lin)


def _advance(a_hat, v_hat, h, t, nl: _Nonlinearity, n, length, lin, scheme):
    E, P1, P2 = _coefficients(n, float(length), float(h), lin)
    g = nl(a_hat, v_hat, t)
    a1, v1 = kernels.etd_apply(*E, a_hat, v_hat, P1[0], P1[1], g)
    if scheme == "etd1" or not nl.enabled:
        return a1, v1
    dg = nl(a1, v1, t + h) - g
    return a1 + P2[0] * dg, v1 + P2[1] * dg


def step(state: FluidState, dt: float, params: ModelParams, config: SolverConfig, bank=None) -> FluidState:
    """One exponential-integrator step of the normalized system."""
    nl = _Nonlinearity(state.n, state.length, params, config.dealias, config.nonlinear)
    a, v = _advance(state.a.hat, state.v.hat, dt, state.t, nl, state.n, state.length,
                    LinearParams.normalized(), config.scheme)
    return FluidState(state.a.with_hat(a), state.v.with_hat(v), state.t + dt)


def momentum_rhs(state: FluidState, params: ModelParams, config: SolverConfig | None = None) -> SpectralField:
    """``v_t = a_y + v_yy + g`` for a normalized state."""
    dealias = True if config is None else config.dealias
    enabled = True if config is None else config.nonlinear
    nl = _Nonlinearity(state.n, state.length, params, dealias, enabled)
    dk = odd_derivative_symbol(state.n, state.length)
    vt = dk * state.a.hat - state.v.xi**2 * state.v.hat + nl(state.a.hat, state.v.hat, state.t)
    return state.a.with_hat(vt)


# --------------------------------------------------------------------------
# variant plumbing: the diffusive system is the plain one with (Ma/nu, nu^2)


@dataclass(frozen=True)
class _Frame:
    """Affine relabelling between caller variables and normalized ones."""

    model: ModelParams
    length: float
    T: float

    def forward(self, s: FluidState) -> FluidState:
        return rescale_normalize(s, self.model, "forward")

    def backward(self, s: FluidState) -> FluidState:
        out = rescale_normalize(s, self.model, "backward")
        # pin the length exactly to the caller's grid
        return FluidState(SpectralField(out.a.values, self.length),
                          SpectralField(out.v.values, self.length), out.t)

    def vt_factor(self) -> float:
        return self.model.eta_bar / self.model.Ma * self.T


def _frame_for(params, config, length):
    if config.variant == "normalized":
        return _Frame(params, length, 1.0)
    model = params.diffusive()
    return _Frame(model, length, model.Ma**-2 / model.nu_bar)


# --------------------------------------------------------------------------
# simulate


def _schedule(times: np.ndarray, dt: float):
    """Yield ``(k_out, n_sub, h)`` for each output interval."""
    for k in range(1, times.size):
        span = times[k] - times[k - 1]
        n_sub = max(1, int(math.ceil(span / dt * (1 - 1e-12))))
        yield k, n_sub, span / n_sub


def simulate(a0: SpectralField, v0: SpectralField, params: ModelParams, config: SolverConfig,
             bank=None) -> Trajectory:
    """Integrate to ``config.t_end`` (or the last output time), recording snapshots.

    For the ``diffusive`` variant the inputs are the rescaled perturbation
    ``eta - eta_bar`` and velocity in original units; internally the run uses
    normalized variables on a relabelled circle.
    """
    if abs(a0.mean) > 1e-10 * max(1.0, float(np.max(np.abs(a0.values)))):
        raise ValueError("initial perturbation must have zero mean")
    length = a0.length
    frame = _frame_for(params, config, length)
    state0 = FluidState(a0, v0, 0.0)
    work = frame.forward(state0) if config.variant != "normalized" else state0
    times = config.snapshot_times()
    wtimes = times * frame.T
    n, wl = work.n, work.length
    lin = LinearParams.normalized()
    nl = _Nonlinearity(n, wl, params, config.dealias, config.nonlinear)
    if bank is None and config.record_blocks:
        bank = default_bank(n, length)

    states = [state0]
    vts = []
    a_hat, v_hat = work.a.hat, work.v.hat

    def rhs_vt(a_h, v_h, t):
        dk = odd_derivative_symbol(n, wl)
        xi2 = (2 * np.pi / wl * np.arange(n // 2 + 1)) ** 2
        return dk * a_h - xi2 * v_h + nl(a_h, v_h, t)

    if config.record_blocks:
        vts.append(rhs_vt(a_hat, v_hat, 0.0))
    for k, n_sub, h in _schedule(wtimes, config.dt * frame.T):
        t = wtimes[k - 1]
        for _ in range(n_sub):
            try:
                a_hat, v_hat = _advance(a_hat, v_hat, h, t, nl, n, wl, lin, config.scheme)
            except RegimeError as exc:
                raise RegimeError(f"state left perturbative regime near t = {t / frame.T:.6g}: {exc}") from exc
            t += h
        ws = FluidState(SpectralField.from_hat(a_hat, wl, n), SpectralField.from_hat(v_hat, wl, n), wtimes[k])
        out = ws if config.variant == "normalized" else frame.backward(ws)
        states.append(FluidState(out.a, out.v, float(times[k])))
        if config.record_blocks:
            vts.append(rhs_vt(a_hat, v_hat, wtimes[k]))

    traj = Trajectory(states, np.asarray(times, float), j0=config.j0,
                      alpha=1.0 if config.variant == "normalized" else 1.0 / params.nu_check,
                      params=params, config=config, bank=bank)
    a_means = np.array([s.a.mean for s in states])
    v_means = np.array([s.v.mean for s in states])
    traj.diagnostics.update({
        "l2_a": np.array([s.a.lp_norm(2) for s in states]),
        "l2_v": np.array([s.v.lp_norm(2) for s in states]),
        "linf_a": np.array([s.a.lp_norm(np.inf) for s in states]),
        "mean_drift_a": np.abs(a_means - a_means[0]),
        "mean_drift_v": np.abs(v_means - v_means[0]),
    })
    if config.record_blocks:
        vfac = 1.0 if config.variant == "normalized" else frame.vt_factor()
        vt_fields = [SpectralField(np.fft.irfft(h, n=n) * vfac, length) for h in vts]
        record_blocks(traj, bank, config.track_p, vt_fields)
    return traj


def record_blocks(traj: Trajectory, bank, track_p=(2.0,), vt_fields=None) -> None:
    """Fill ``traj.block_history`` and the running solution functionals."""
    t = traj.times
    js = bank.js

    def hist(fields, p):
        return BlockNormHistory(t, np.array([block_norms(f, bank, p) for f in fields]), js, p)

    a = [s.a for s in traj.states]
    v = [s.v for s in traj.states]
    h = traj.block_history
    h[("a", 2.0)] = hist(a, 2.0)
    h[("v", 2.0)] = hist(v, 2.0)
    for p in track_p:
        p = float(p)
        h[("a_y", p)] = hist([f.derivative() for f in a], p)
        h[("v", p)] = h[("v", 2.0)] if p == 2.0 else hist(v, p)
        h[("v_yy", p)] = hist([f.derivative(2) for f in v], p)
        if vt_fields is not None:
            h[("v_t", p)] = hist(vt_fields, p)
            traj.diagnostics[f"X_{p:g}"] = solution_functional(h, p, traj.j0, traj.alpha)


# --------------------------------------------------------------------------
# Picard iterates


@dataclass(eq=False)
class PicardResult:
    iterates: list
    differences: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        d = self.differences
        return d[1:] / np.where(d[:-1] > 0, d[:-1], np.inf)


def picard_sequence(a0: SpectralField, v0: SpectralField, n_iters: int, params: ModelParams,
                    config: SolverConfig, bank=None) -> PicardResult:
    """Iterates of the linear problem with frozen source, via trapezoid Duhamel.

    ``U^{n+1}(t_k) = E(t_k) U_0 + I_k`` with
    ``I_k = E(dt) (I_{k-1} + dt/2 G_{k-1}) + dt/2 G_k`` and ``G = (0, g(U^n))``.
    ``differences[n]`` is the sup over time of the max-norm gap between
    iterates ``n + 1`` and ``n``.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    length = a0.length
    frame = _frame_for(params, config, length)
    state0 = FluidState(a0, v0, 0.0)
    work = frame.forward(state0) if config.variant != "normalized" else state0
    n, wl = work.n, work.length
    K = int(round(config.t_end / config.dt))
    if not math.isclose(K * config.dt, config.t_end, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("picard_sequence needs t_end to be a multiple of dt")
    h = config.dt * frame.T
    lin = LinearParams.normalized()
    E = state_matrix(n, wl, h, lin)
    nl = _Nonlinearity(n, wl, params, config.dealias, config.nonlinear)
    stride = config.snapshot_stride

    free = np.empty((K + 1, 2, n // 2 + 1), complex)
    free[0] = work.a.hat, work.v.hat
    for k in range(1, K + 1):
        free[k] = kernels.etd_apply(*E, free[k - 1, 0], free[k - 1, 1])

    def to_traj(U):
        idx = list(range(0, K + 1, stride))
        if idx[-1] != K:
            idx.append(K)
        states = []
        for k in idx:
            ws = FluidState(SpectralField.from_hat(U[k, 0], wl, n), SpectralField.from_hat(U[k, 1], wl, n), k * h)
            out = ws if config.variant == "normalized" else frame.backward(ws)
            states.append(FluidState(out.a, out.v, k * config.dt))
        return Trajectory(states, np.array(idx) * config.dt, j0=config.j0, params=params, config=config)

    def sup_gap(U, V):
        d = np.fft.irfft(U - V, n=n, axis=-1)
        return float(np.max(np.abs(d)))

    current = free
    iterates = [to_traj(current)]
    diffs = []
    zero = np.zeros(n // 2 + 1, complex)
    for _ in range(n_iters):
        nxt = np.empty_like(current)
        G_prev = nl(current[0, 0], current[0, 1], 0.0)
        Ia, Iv = zero, zero
        nxt[0] = free[0]
        for k in range(1, K + 1):
            G = nl(current[k, 0], current[k, 1], k * h)
            Ia, Iv = kernels.etd_apply(*E, Ia, Iv + 0.5 * h * G_prev)
            Iv = Iv + 0.5 * h * G
            nxt[k, 0] = free[k, 0] + Ia
            nxt[k, 1] = free[k, 1] + Iv
            G_prev = G
        diffs.append(sup_gap(nxt, current))
        current = nxt
        iterates.append(to_traj(current))
    return PicardResult(iterates, np.array(diffs))


# --------------------------------------------------------------------------
# limit ODE


@dataclass(eq=False)
class LimitTrajectory:
    times: np.ndarray
    theta: np.ndarray
    length: float

    def field(self, k: int) -> SpectralField:
        return SpectralField(self.theta[k], self.length)


def limit_ode_solve(eta0: SpectralField, params: ModelParams, nu_bar: float | None, dt: float, t_end: float,
                    output_times=None) -> LimitTrajectory:
    """RK4 for ``theta_t = nu_bar (nu^-1 Q)(theta)`` independently at each grid point.

    ``nu_bar`` rescales the viscosity law (shape kept); the right-hand side
    does not depend on it, which is the point of the diffusive scaling.
    """
    model = params if nu_bar is None else params.with_nu_bar(nu_bar)
    lo, hi = ADMISSIBLE[0] * model.eta_bar, ADMISSIBLE[1] * model.eta_bar

    def check(th, t):
        if np.min(th) < lo or np.max(th) > hi:
            raise RegimeError(f"state left perturbative regime at t = {t:.6g}")

    times = (np.asarray(output_times, float) if output_times is not None
             else dt * np.arange(int(math.floor(t_end / dt * (1 + 1e-12))) + 1))
    if times[0] != 0:
        times = np.concatenate([[0.0], times])
    f = model.limit_rhs
    th = np.array(eta0.values, dtype=float)
    check(th, 0.0)
    out = [th.copy()]
    for k, n_sub, h in _schedule(times, dt):
        t = times[k - 1]
        for _ in range(n_sub):
            k1 = f(th)
            k2 = f(th + 0.5 * h * k1)
            k3 = f(th + 0.5 * h * k2)
            k4 = f(th + h * k3)
            th = th + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            check(th, t)
        out.append(th.copy())
    return LimitTrajectory(times, np.array(out), eta0.length)


# --------------------------------------------------------------------------
# monitors


def centered_derivative(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Second-order three-point derivative at interior (possibly non-uniform) times."""
    t = np.asarray(times, float)
    h0 = (t[1:-1] - t[:-2]).reshape((-1,) + (1,) * (values.ndim - 1))
    h1 = (t[2:] - t[1:-1]).reshape(h0.shape)
    return (-h1 / (h0 * (h0 + h1)) * values[:-2] + (h1 - h0) / (h0 * h1) * values[1:-1]
            + h0 / (h1 * (h0 + h1)) * values[2:])


def _normalized_states(traj: Trajectory):
    cfg = traj.config
    if cfg is None or cfg.variant == "normalized":
        return traj.states, traj.times, traj.params
    frame = _frame_for(traj.params, cfg, traj.states[0].length)
    return [frame.forward(s) for s in traj.states], traj.times * frame.T, traj.params


def residual_monitor(traj: Trajectory, params: ModelParams | None = None, bank=None) -> dict:
    """L2 residuals of ``a_t + a - w_y`` and ``w_t - w_yy - g - (v - <v>)``.

    ``w`` is the effective velocity; time derivatives come from centered
    differences on the snapshots, so residuals measure O(h^2) differencing.
    """
    if len(traj.states) < 3:
        raise ValueError("need at least 3 snapshots")
    states, times, model = _normalized_states(traj)
    if params is not None:
        model = params
    cfg = traj.config
    nl_on = True if cfg is None else cfg.nonlinear
    dealias = True if cfg is None else cfg.dealias
    n, length = states[0].n, states[0].length
    nl = _Nonlinearity(n, length, model, dealias, nl_on)
    a = np.array([s.a.values for s in states])
    w = np.array([effective_velocity(s.a, s.v).values for s in states])
    at = centered_derivative(times, a)
    wt = centered_derivative(times, w)
    dy = length / n
    hf3, hf2 = [], []
    for i, s in enumerate(states[1:-1]):
        wf = SpectralField(w[i + 1], length)
        r3 = at[i] + s.a.values - wf.derivative().values
        g = np.fft.irfft(nl(s.a.hat, s.v.hat, s.t), n=n)
        r2 = wt[i] - wf.derivative(2).values - g - (s.v.values - s.v.mean)
        hf3.append(lp_norm(r3, dy, 2))
        hf2.append(lp_norm(r2, dy, 2))
    return {"times": traj.times[1:-1], "hf3": np.array(hf3), "hf2": np.array(hf2)}


def lyapunov_constants(bank) -> float:
    """Measured Bernstein constant ``C_B`` of the bank (squared support ratio)."""
    return bank.bernstein_ratio() ** 2


def lyapunov_monitor(traj: Trajectory, j: int, kappa: float, bank=None, j0: int | None = None) -> dict:
    """``L_j^2 = ||(a_j, v_j)||^2 - 2 kappa int v_j a_{j,y}`` along a trajectory."""
    if bank is None:
        bank = traj.bank if traj.bank is not None else default_bank(traj.states[0].n, traj.states[0].length)
    if j0 is None:
        j0 = traj.j0
    if j > j0:
        raise ValueError(f"ring {j} lies above j0 = {j0}")
    CB = lyapunov_constants(bank)
    if not 2 * CB * 2.0**j0 * kappa <= 1:
        raise ValueError(f"kappa = {kappa:g} violates 2 C_B 2^j0 kappa <= 1 (C_B = {CB:.4g})")
    if not kappa * (1.5 + CB * 4.0**j0) <= 1:
        raise ValueError(f"kappa = {kappa:g} violates kappa (3/2 + C_B 4^j0) <= 1 (C_B = {CB:.4g})")
    L2, E2 = [], []
    for s in traj.states:
        aj = lp_block(s.a, j, bank)
        vj = lp_block(s.v, j, bank)
        dy = s.a.dy
        e2 = dy * (np.sum(aj.values**2) + np.sum(vj.values**2))
        cross = dy * np.sum(vj.values * aj.derivative().values)
        L2.append(e2 - 2 * kappa * cross)
        E2.append(e2)
    L2 = np.array(L2)
    E2 = np.array(E2)
    L = np.sqrt(np.maximum(L2, 0.0))
    ratio = np.divide(L, np.sqrt(E2), out=np.ones_like(L), where=E2 > 0)
    report = {"times": traj.times, "L": L, "ratio": ratio, "C_B": CB}
    if len(traj.states) >= 3:
        dL2 = centered_derivative(traj.times, L2)
        report["dL2dt"] = dL2
        mid = L2[1:-1]
        rate = np.divide(-dL2, 2 * 4.0**j * mid, out=np.full_like(mid, np.inf), where=mid > 0)
        report["c_measured"] = float(np.min(rate)) if rate.size else math.nan
    return report
