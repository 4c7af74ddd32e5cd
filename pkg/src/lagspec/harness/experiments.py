"""Experiment drivers. Each returns a report dict with ``checks``, ``passed``,
``series`` (columns for the CSV) and the resolved ``config``."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
from scipy.integrate import solve_ivp

from ..field import SpectralField
from ..linear_propagator import LinearParams, field_matrix, mode_matrix, mode_spectrum, overdamped_mode
from ..lp_besov import BesovSpec, besov_norm, weighted_sum
from ..model import decay_data_functional, decay_functionals, smallness_lhs
from ..solver import limit_ode_solve, picard_sequence, simulate
from .config import Config, config_from_dict
from .data import make_datum
from .fitting import fit_rate


def _report(kind: str, cfg: Config, checks: dict, series: dict | None = None, **extra) -> dict:
    checks = {k: bool(v) for k, v in checks.items()}
    out = {"kind": kind, "config": cfg.model_dump(mode="json"), "checks": checks,
           "passed": all(checks.values()), "series": series or {}}
    out.update(extra)
    return out


def _l2_pair(traj) -> np.ndarray:
    return np.sqrt(traj.diagnostics["l2_a"] ** 2 + traj.diagnostics["l2_v"] ** 2)


# --------------------------------------------------------------------------
# simulate


def run_simulate(cfg: Config) -> dict:
    params = cfg.model.build()
    bank = cfg.grid.bank()
    a0, v0 = make_datum(cfg.data, cfg.grid.n, cfg.grid.L)
    traj = simulate(a0, v0, params, cfg.solver.build(cfg.grid.j0), bank)
    d = traj.diagnostics
    series = {"t": traj.times, "l2_a": d["l2_a"], "l2_v": d["l2_v"], "linf_a": d["linf_a"],
              "X_2": d["X_2"], "mean_drift_a": d["mean_drift_a"], "mean_drift_v": d["mean_drift_v"]}
    checks = {"mean_conserved": max(d["mean_drift_a"].max(), d["mean_drift_v"].max()) < 1e-13}
    lhs = smallness_lhs(a0, v0, params, 2.0, bank, cfg.grid.j0)
    return _report("simulate", cfg, checks, series,
                   smallness_ratio=lhs / (params.eta_bar * params.nu_bar),
                   X_2_final=float(d["X_2"][-1]))


# --------------------------------------------------------------------------
# decay


def heat_control(a0: SpectralField, times) -> np.ndarray:
    """``||e^{t Delta} f||_{L^2}`` by Parseval: the pure-diffusion reference rate."""
    xi = a0.xi
    w = np.full(xi.size, 2.0)
    w[0] = 1.0
    if a0.n % 2 == 0:
        w[-1] = 1.0
    e = np.array([(w * np.abs(a0.hat * np.exp(-xi**2 * t)) ** 2).sum() for t in times])
    return np.sqrt(e * a0.length) / a0.n


def run_decay(cfg: Config) -> dict:
    exp = cfg.experiment
    if exp.fit_window is None:
        raise ValueError("decay needs experiment.fit_window")
    L = cfg.grid.L
    if exp.fit_window[1] > 0.1 * (L / (2 * math.pi)) ** 2:
        raise ValueError("fit window outside validity: t_max exceeds 0.1 (L/2pi)^2")
    params = cfg.model.build()
    bank = cfg.grid.bank()
    j0 = cfg.grid.j0
    a0, v0 = make_datum(cfg.data, cfg.grid.n, L)
    if cfg.data.recipe == "zero" or (not np.any(a0.values) and not np.any(v0.values)):
        return _report("decay", cfg, {}, status="no signal",
                       D_low=0.0, D_high_a=0.0, D_high_v=0.0, X20=0.0)
    t0 = time.perf_counter()
    traj = simulate(a0, v0, params, cfg.solver.build(j0), bank)
    t = traj.times
    l2 = _l2_pair(traj)
    fit = fit_rate(t, l2, exp.fit_window)
    target = -0.5 if exp.slope_target is None else exp.slope_target
    heat = heat_control(a0 if np.any(a0.values) else v0, t)
    heat_fit = fit_rate(t, heat, exp.fit_window)
    hi = BesovSpec(p=2, sigma=0.5, range="high", j0=j0)
    a_high = weighted_sum(traj.block_history[("a", 2.0)].per_block, bank.js, hi)
    hf_fit = fit_rate(t, a_high, exp.fit_window)
    d_low, d_ha, d_hv = decay_functionals(traj, bank, j0)
    D = d_low + d_ha + d_hv
    X20 = decay_data_functional(a0, v0, bank)
    half = np.searchsorted(t, 0.5 * t[-1])
    checks = {
        "l2_slope": abs(fit.exponent - target) <= exp.slope_tol,
        "heat_control": abs(heat_fit.exponent + 0.5) <= 0.1,
        "high_freq_slope": hf_fit.exponent <= -1.4,
        "D_high_a_bounded": bool(np.isfinite(d_ha[-1]) and d_ha[-1] <= d_ha[half] * (1 + 1e-2)),
        "D_nondecreasing": bool(np.all(np.diff(D) >= -1e-14 * D.max())),
    }
    series = {"t": t, "l2": l2, "heat": heat, "a_high_B12": a_high,
              "D_low": d_low, "D_high_a": d_ha, "D_high_v": d_hv}
    return _report("decay", cfg, checks, series, status="ok",
                   fit=fit.to_dict(), heat_fit=heat_fit.to_dict(), high_freq_fit=hf_fit.to_dict(),
                   D_final=float(D[-1]), X20=X20, D_over_X20=float(D[-1] / X20),
                   elapsed=time.perf_counter() - t0)


# --------------------------------------------------------------------------
# diffusive limit


def _check_sweep(sweep):
    if sweep is None or len(sweep) < 2:
        raise ValueError("sweep too short to fit")
    s = np.asarray(sweep, dtype=float)
    if len(s) < 4:
        raise ValueError("sweep too short to fit: need at least 4 values")
    r = s[1:] / s[:-1]
    if np.any(s <= 0) or not np.allclose(r, r[0], rtol=1e-9) or r[0] <= 1:
        raise ValueError("non-geometric sweep")
    return s


def affine_limit_oracle(a0: SpectralField, v0: SpectralField, Ma: float, nu_bar: float, times) -> float:
    """``sup_t ||eta - theta||_inf`` for affine pressure and constant viscosity, per mode."""
    lin = LinearParams.diffusive(Ma, nu_bar)
    worst = 0.0
    for t in times:
        e = field_matrix(a0.xi, t, lin)
        a_hat = e[0] * a0.hat + e[1] * v0.hat
        b_hat = math.exp(-t / Ma**2) * a0.hat
        worst = max(worst, float(np.max(np.abs(np.fft.irfft(a_hat - b_hat, n=a0.n)))))
    return worst


def visco_point(cfg_dict: dict, nu_bar: float) -> dict:
    """One sweep point; module level so that it can run in a worker process."""
    cfg = config_from_dict(cfg_dict)
    params = cfg.model.build(nu_bar)
    bank = cfg.grid.bank()
    a0, v0 = make_datum(cfg.data, cfg.grid.n, cfg.grid.L)
    vc0 = v0 * nu_bar
    scfg = cfg.solver.build(cfg.grid.j0, variant="diffusive")
    t0 = time.perf_counter()
    traj = simulate(a0, vc0, params, scfg, bank)
    lim = limit_ode_solve(a0 + params.eta_bar, params, nu_bar, scfg.dt, scfg.t_end, output_times=traj.times)
    err = np.array([np.max(np.abs(s.a.values + params.eta_bar - lim.theta[k])) for k, s in enumerate(traj.states)])
    full = BesovSpec(p=2, sigma=0.5)
    gap_t = np.array([besov_norm(s.v.derivative() - params.limit_rhs(lim.theta[k]), full, bank)
                      for k, s in enumerate(traj.states)])
    gap = float(np.sum(0.5 * (gap_t[1:] + gap_t[:-1]) * np.diff(traj.times)))
    sig = cfg.experiment.sigma
    nc = params.nu_check

    def b(f, s):
        return besov_norm(f, BesovSpec(p=2, sigma=s), bank)

    i_sigma = b(a0, -sig) / nc + b(a0, 1 - sig) + b(v0, -sig) / nu_bar
    small = b(a0, -0.5) / nc + b(a0, 0.5) + b(v0, -0.5) / nu_bar
    out = {"nu_bar": nu_bar, "nu_check": nc, "E": float(err.max()), "gap": gap,
           "I_minus_sigma": i_sigma, "I_over_bound": i_sigma / nc ** (sig - 0.5),
           "smallness": small, "smallness_ok": small <= cfg.experiment.smallness_c * params.eta_bar,
           "elapsed": time.perf_counter() - t0}
    if cfg.model.pressure.law == "affine" and cfg.model.viscosity.law == "lagrangian":
        out["E_oracle"] = affine_limit_oracle(a0, vc0, params.Ma, nu_bar, traj.times)
    return out


def run_visco_limit(cfg: Config, workers: int | None = None) -> dict:
    sweep = _check_sweep(cfg.model.nu_bar_sweep)
    workers = workers or cfg.experiment.workers
    cd = cfg.model_dump(mode="json")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(visco_point, [cd] * len(sweep), sweep))
    else:
        points = [visco_point(cd, nb) for nb in sweep]
    nc = np.array([p["nu_check"] for p in points])
    E = np.array([p["E"] for p in points])
    gap = np.array([p["gap"] for p in points])
    fit = fit_rate(nc, E)
    sig = cfg.experiment.sigma
    rate = (2 * sig - 1) / (sig + 1.5)
    checks = {
        "error_slope": fit.exponent <= -(rate - 0.15),
        "error_decreasing": bool(np.all(np.diff(E) < 0)),
        "gap_decreasing": bool(np.all(np.diff(gap) < 0)),
    }
    if "E_oracle" in points[0]:
        Eo = np.array([p["E_oracle"] for p in points])
        checks["affine_oracle"] = bool(np.all(np.abs(E - Eo) <= 1e-6 * np.maximum(Eo, 1e-300)))
    series = {"nu_bar": sweep, "nu_check": nc, "E": E, "gap": gap,
              "I_minus_sigma": [p["I_minus_sigma"] for p in points],
              "smallness": [p["smallness"] for p in points]}
    return _report("visco-limit", cfg, checks, series, fit=fit.to_dict(), theoretical_rate=-rate,
                   smallness_flagged=[not p["smallness_ok"] for p in points], points=points)


# --------------------------------------------------------------------------
# stability


def _pair_norm(da: SpectralField, dv: SpectralField, bank) -> float:
    return (besov_norm(da, BesovSpec(p=2, sigma=0.5), bank)
            + besov_norm(dv, BesovSpec(p=2, sigma=-0.5), bank))


def run_stability(cfg: Config, nonlinear: bool = True) -> dict:
    exp = cfg.experiment
    if exp.perturbation is None:
        raise ValueError("stability needs experiment.perturbation")
    params = cfg.model.build()
    bank = cfg.grid.bank()
    n, L = cfg.grid.n, cfg.grid.L
    scfg = cfg.solver.build(cfg.grid.j0, nonlinear=nonlinear)
    scfg = replace(scfg, record_blocks=False)
    a0, v0 = make_datum(cfg.data, n, L)
    base = simulate(a0, v0, params, scfg, bank).states[-1]
    diffs = []
    for eps in exp.epsilons:
        pa, pv = make_datum(exp.perturbation, n, L, amplitude=eps)
        end = simulate(a0 + pa, v0 + pv, params, scfg, bank).states[-1]
        diffs.append(_pair_norm(end.a - base.a, end.v - base.v, bank))
    diffs = np.array(diffs)
    ratios = np.divide(diffs[:-1], diffs[1:], out=np.zeros(len(diffs) - 1), where=diffs[1:] > 0)
    checks = {"ratios_in_band": bool(np.all((ratios >= 1.8) & (ratios <= 2.2)))}
    return _report("stability", cfg, checks, {"epsilon": exp.epsilons, "difference": diffs},
                   ratios=ratios)


# --------------------------------------------------------------------------
# linear check


def _ode_oracle(p: LinearParams, xi: float, y0, ts):
    A = p.symbol(xi)
    # DOP853 loses ~1e-10 once mu xi^2 t passes ~1e3; Radau is exact there but slow
    stiff = p.mu * xi**2 * ts[-1] > 1e3
    kw = {"method": "Radau", "jac": A} if stiff else {"method": "DOP853"}
    sol = solve_ivp(lambda t, y: A @ y, (0.0, ts[-1]), y0, rtol=1e-13, atol=1e-20, t_eval=ts, **kw)
    return sol.y


def run_linear_check(cfg: Config) -> dict:
    params = cfg.model.build()
    plist = [LinearParams.normalized(), LinearParams.physical(params.Ma, params.nu_bar)]
    ts = np.concatenate([[0.0], np.geomspace(1e-3, 8.0, 11)])
    y0 = np.array([0.7, -0.4])
    worst_ode = worst_id = worst_td = worst_jump = 0.0
    n_samples = 0
    for p in plist:
        kc = p.critical_xi
        xis = np.concatenate([kc * np.geomspace(0.02, 0.95, 8),
                              kc * (1 + np.array([-1e-9, -1e-10, 0.0, 1e-10, 1e-9])),
                              kc * np.geomspace(1.05, 6.0, 7)])
        for xi in xis:
            ref = _ode_oracle(p, xi, y0, ts)
            a, u = _propagate_samples(y0[0], y0[1], xi, ts, p)
            err = np.hypot(a.real - ref[0], u.real - ref[1]) / np.hypot(ref[0], ref[1])
            worst_ode = max(worst_ode, float(err.max()))
            worst_id = max(worst_id, abs(a[0] - y0[0]) + abs(u[0] - y0[1]))
            n_samples += ts.size
            sp = mode_spectrum(xi, p)
            tr = sp.lambda_plus + sp.lambda_minus + p.mu * xi**2
            det = sp.lambda_plus * sp.lambda_minus - p.alpha * p.beta * xi**2
            worst_td = max(worst_td, abs(tr) / (p.mu * xi**2), abs(det) / abs(p.alpha * p.beta * xi**2))
        # a jump is what is left of the cross-boundary difference after removing
        # the smooth variation, measured by an equal-width step on one side
        for t in (0.1, 1.0, 5.0):
            lo, hi, hi2 = (np.array(mode_matrix(kc * (1 + d), t, p)) for d in (-1e-6, 1e-6, 3e-6))
            jump = np.abs((hi - lo) - (hi2 - hi)).max() / np.abs(hi).max()
            worst_jump = max(worst_jump, float(jump))
    # overdamping: relative gap to the large-viscosity asymptotics at xi = 1
    od = []
    for nb in (8.0, 16.0, 32.0):
        p = LinearParams.physical(params.Ma, nb)
        t = nb * params.Ma**2
        a0h, v0h = 0.3 + 0.1j, 0.2 - 0.05j
        e = field_matrix(np.array([1.0]), t, p)
        a = e[0][0] * a0h + e[1][0] * v0h
        a_asym, _ = overdamped_mode(a0h, v0h, 1.0, t, params.Ma, nb)
        od.append(abs(a / a_asym - 1.0))
    od = np.array(od)
    checks = {
        "ode_oracle_1e-10": worst_ode <= 1e-10,
        "identity_at_t0": worst_id <= 1e-15,
        "trace_det_1e-12": worst_td <= 1e-12,
        "boundary_continuity_1e-6": worst_jump <= 1e-6,
        "overdamping_ratio_to_1": bool(np.all(np.diff(od) < 0)),
        "enough_samples": n_samples >= 200,
    }
    return _report("linear-check", cfg, checks, {"nu_bar": [8.0, 16.0, 32.0], "overdamping_gap": od},
                   worst_ode=worst_ode, worst_trace_det=worst_td, worst_jump=worst_jump,
                   n_samples=n_samples)


def _propagate_samples(a0, u0, xi, ts, p):
    e00, e01, e10, e11 = mode_matrix(xi, ts, p)
    return e00 * a0 + e01 * u0, e10 * a0 + e11 * u0


# --------------------------------------------------------------------------
# picard


def run_picard(cfg: Config) -> dict:
    params = cfg.model.build()
    bank = cfg.grid.bank()
    a0, v0 = make_datum(cfg.data, cfg.grid.n, cfg.grid.L)
    scfg = cfg.solver.build(cfg.grid.j0)
    res = picard_sequence(a0, v0, cfg.experiment.n_iters, params, scfg, bank)
    direct = simulate(a0, v0, params, replace(scfg, record_blocks=False, output_times=None))
    last = res.iterates[-1]
    k_end = direct.states[-1]
    gap = float(max(np.max(np.abs(last.states[-1].a.values - k_end.a.values)),
                    np.max(np.abs(last.states[-1].v.values - k_end.v.values))))
    ratios = res.ratios
    scale = float(max(np.max(np.abs(a0.values)), np.max(np.abs(v0.values)), 1e-300))
    checks = {"contraction": bool(np.all(ratios[1:] < 1.0)) if ratios.size > 1 else bool(np.all(ratios < 1.0)),
              "agrees_with_direct": gap <= 10 * scfg.dt**2 * scale}
    return _report("picard", cfg, checks, {"iterate": np.arange(1, len(res.differences) + 1),
                                           "difference": res.differences},
                   ratios=ratios, gap_to_direct=gap)


RUNNERS = {
    "linear-check": run_linear_check,
    "simulate": run_simulate,
    "decay": run_decay,
    "visco-limit": run_visco_limit,
    "stability": run_stability,
    "picard": run_picard,
}
