"""Deterministic initial-datum recipes (no random numbers anywhere)."""
from __future__ import annotations

import numpy as np

from ..field import SpectralField, dealias_mask, grid, wavenumbers
from .config import DataConfig


def _scale(a: np.ndarray, v: np.ndarray, amplitude: float):
    peak = max(np.max(np.abs(a)), np.max(np.abs(v)))
    if peak == 0:
        return a, v
    return a * (amplitude / peak), v * (amplitude / peak)


def make_datum(cfg: DataConfig, n: int, length: float, amplitude: float | None = None):
    """Return ``(a0, v0)`` on the grid, scaled so that the larger peak equals ``amplitude``."""
    eps = cfg.amplitude if amplitude is None else amplitude
    y = grid(n, length)
    a = np.zeros(n)
    v = np.zeros(n)
    if cfg.recipe == "modes":
        for m in cfg.modes:
            phase = 2 * np.pi * m.m * y / length + m.phase
            a += m.a * np.cos(phase)
            v += m.v * np.cos(phase)
    elif cfg.recipe == "bump":
        z = (y - cfg.center * length) / cfg.width
        prof = np.exp(-0.5 * z * z)
        f = SpectralField(prof, length).derivative(cfg.derivative) if cfg.derivative else SpectralField(prof, length)
        base = f.values - f.mean
        a, v = cfg.weight_a * base, cfg.weight_v * base
    elif cfg.recipe == "broadband":
        xi = wavenumbers(n, length)
        kc = xi[dealias_mask(n)].max()
        cut = cfg.cutoff if cfg.cutoff is not None else kc / 4
        hat = xi**cfg.exponent * np.exp(-0.5 * (xi / cut) ** 2) * np.exp(-1j * xi * cfg.center * length)
        hat[~dealias_mask(n)] = 0.0
        hat[0] = 0.0
        base = np.fft.irfft(hat, n=n)
        a, v = cfg.weight_a * base, cfg.weight_v * base
    a, v = _scale(a, v, eps)
    return SpectralField(a, length), SpectralField(v, length)
