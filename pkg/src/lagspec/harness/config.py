"""Experiment configuration: one YAML document per experiment, unknown keys rejected."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..lp_besov import build_filter_bank, default_bank
from ..model import (
    ModelParams,
    affine_pressure,
    eulerian_constant_viscosity,
    gamma_pressure,
    lagrangian_constant_viscosity,
    normalize,
)
from ..solver import SolverConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PressureConfig(_Strict):
    law: Literal["affine", "gamma"] = "gamma"
    gamma: float = 1.4
    A: float = Field(1.0, gt=0)
    slope: float = Field(1.0, gt=0)


class ViscosityConfig(_Strict):
    law: Literal["eulerian", "lagrangian"] = "lagrangian"


class ModelConfig(_Strict):
    pressure: PressureConfig = PressureConfig()
    viscosity: ViscosityConfig = ViscosityConfig()
    eta_bar: float = Field(1.0, gt=0)
    Ma: Optional[float] = Field(None, gt=0)
    nu_bar: float = Field(1.0, gt=0)
    nu_bar_sweep: Optional[list[float]] = None

    def build(self, nu_bar: float | None = None) -> ModelParams:
        """Raw laws with ``Ma`` (if set) and ``nu_bar`` imposed at ``eta_bar``."""
        eb = self.eta_bar
        nb = self.nu_bar if nu_bar is None else nu_bar
        p = self.pressure
        if p.law == "affine":
            slope = p.slope if self.Ma is None else self.Ma**-2
            pressure = affine_pressure(slope, eb)
        else:
            A = p.A if self.Ma is None else self.Ma**-2 / (p.gamma * eb ** (-p.gamma - 1.0))
            pressure = gamma_pressure(p.gamma, A, eb)
        if self.viscosity.law == "eulerian":
            viscosity = eulerian_constant_viscosity(nb * eb)
        else:
            viscosity = lagrangian_constant_viscosity(nb)
        return normalize(pressure, viscosity, eb)


class GridConfig(_Strict):
    n: int = Field(1024, gt=0)
    length: Optional[float] = Field(None, gt=0)
    length_pi: Optional[float] = Field(None, gt=0)
    j_min: Optional[int] = None
    j_max: Optional[int] = None
    j0: int = 0

    @model_validator(mode="after")
    def _check(self):
        if (self.length is None) == (self.length_pi is None):
            raise ValueError("give exactly one of grid.length or grid.length_pi")
        if self.n & (self.n - 1):
            raise ValueError("grid.n must be a power of two")
        if (self.j_min is None) != (self.j_max is None):
            raise ValueError("give both grid.j_min and grid.j_max or neither")
        return self

    @property
    def L(self) -> float:
        return self.length if self.length is not None else self.length_pi * math.pi

    def bank(self):
        if self.j_min is None:
            return default_bank(self.n, self.L)
        return build_filter_bank(self.n, self.L, self.j_min, self.j_max)


class TimesConfig(_Strict):
    """Output times: a geometric run, a linear run, or both (merged)."""

    geom: Optional[tuple[float, float, int]] = None
    lin: Optional[tuple[float, float, int]] = None

    def values(self) -> tuple:
        parts = []
        if self.geom is not None:
            parts.append(np.geomspace(*self.geom[:2], int(self.geom[2])))
        if self.lin is not None:
            parts.append(np.linspace(*self.lin[:2], int(self.lin[2])))
        if not parts:
            raise ValueError("output_times needs geom or lin")
        return tuple(np.unique(np.concatenate(parts)))


class SolverBlock(_Strict):
    dt: float = Field(0.01, gt=0)
    t_end: float = Field(1.0, ge=0)
    scheme: Literal["etd1", "etd2"] = "etd2"
    dealias: bool = True
    snapshot_stride: int = Field(1, ge=1)
    variant: Literal["normalized", "diffusive"] = "normalized"
    output_times: Optional[Union[list[float], TimesConfig]] = None

    def build(self, j0: int = 0, variant: str | None = None, nonlinear: bool = True) -> SolverConfig:
        ot = self.output_times
        if isinstance(ot, TimesConfig):
            ot = ot.values()
        elif ot is not None:
            ot = tuple(ot)
        return SolverConfig(dt=self.dt, t_end=self.t_end, scheme=self.scheme, dealias=self.dealias,
                            snapshot_stride=self.snapshot_stride, variant=variant or self.variant,
                            output_times=ot, nonlinear=nonlinear, j0=j0)


class ModeSpec(_Strict):
    m: int = Field(gt=0)
    a: float = 0.0
    v: float = 0.0
    phase: float = 0.0


class DataConfig(_Strict):
    recipe: Literal["zero", "modes", "bump", "broadband"] = "bump"
    amplitude: float = Field(0.01, gt=0)
    modes: list[ModeSpec] = []
    center: float = Field(0.5, ge=0, le=1)
    width: float = Field(2.0, gt=0)
    derivative: int = Field(1, ge=0, le=2)
    exponent: float = 0.5
    cutoff: Optional[float] = Field(None, gt=0)
    weight_a: float = 1.0
    weight_v: float = 0.0


class ExperimentConfig(_Strict):
    kind: Literal["linear-check", "simulate", "decay", "visco-limit", "stability", "picard"] = "simulate"
    fit_window: Optional[tuple[float, float]] = None
    sigma: float = 1.0
    smallness_c: float = 1.0
    n_iters: int = Field(4, ge=1)
    kappa: Optional[float] = None
    perturbation: Optional[DataConfig] = None
    epsilons: list[float] = [1e-3, 5e-4, 2.5e-4]
    slope_target: Optional[float] = None
    slope_tol: float = 0.1
    workers: int = Field(1, ge=1)


class Config(_Strict):
    model: ModelConfig = ModelConfig()
    grid: GridConfig
    solver: SolverBlock = SolverBlock()
    data: DataConfig = DataConfig()
    experiment: ExperimentConfig = ExperimentConfig()

    @model_validator(mode="after")
    def _check(self):
        w = self.experiment.fit_window
        if w is not None:
            if not 0 < w[0] < w[1]:
                raise ValueError("fit_window must satisfy 0 < t_min < t_max")
            t_last = self.solver.t_end
            ot = self.solver.output_times
            if isinstance(ot, TimesConfig):
                t_last = max(ot.values())
            elif ot:
                t_last = max(ot)
            if w[1] > t_last * (1 + 1e-12):
                raise ValueError("fit_window must lie inside [0, t_end]")
        return self


def load_config(path: str | Path) -> Config:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return Config.model_validate(raw or {})


def config_from_dict(d: dict) -> Config:
    return Config.model_validate(d)
