"""Pseudospectral toolkit for 1D barotropic compressible Navier-Stokes in
mass-Lagrangian coordinates: exact linear propagation, Littlewood-Paley and
Besov norms, an exponential-integrator solver and experiment drivers."""
from .field import FluidState, SpectralField, dealiased_product, grid
from .kernels import BACKEND
from .lp_besov import (
    BesovSpec,
    BlockNormHistory,
    DyadicFilterBank,
    besov_norm,
    bony_decompose,
    build_filter_bank,
    default_bank,
    hybrid_norms,
    lp_block,
    tilde_norm,
)
from .model import ModelParams, normalize

__version__ = "0.1.0"
