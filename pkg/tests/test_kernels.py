import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lagspec import _kernels_py, kernels

compiled = pytest.importorskip("lagspec._kernels")


def _cplx(rng, m):
    return rng.standard_normal(m) + 1j * rng.standard_normal(m)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 600), st.integers(0, 2**31), st.floats(1.01, 3.0))
def test_gamma_remainder_parity(m, seed, gamma):
    a = np.random.default_rng(seed).uniform(-0.7, 2.5, m)
    np.testing.assert_allclose(compiled.gamma_remainder(a, gamma), _kernels_py.gamma_remainder(a, gamma),
                               rtol=1e-13, atol=1e-16)


def test_gamma_remainder_shape_kept():
    a = np.full((3, 4), 0.1)
    assert compiled.gamma_remainder(a, 1.4).shape == (3, 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 600), st.integers(0, 2**31), st.booleans())
def test_etd_apply_parity(m, seed, forced):
    rng = np.random.default_rng(seed)
    c = [_cplx(rng, m) for _ in range(6)]
    a, v, g = _cplx(rng, m), _cplx(rng, m), _cplx(rng, m)
    extra = (c[4], c[5], g) if forced else ()
    ca, cv = compiled.etd_apply(*c[:4], a, v, *extra)
    pa, pv = _kernels_py.etd_apply(*c[:4], a, v, *extra)
    np.testing.assert_allclose(ca, pa, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(cv, pv, rtol=1e-14, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 600), st.integers(1, 14), st.integers(0, 2**31))
def test_block_energies_parity(m, rings, seed):
    rng = np.random.default_rng(seed)
    h = _cplx(rng, m)
    f = np.abs(rng.standard_normal((rings, m)))
    f[f < 0.5] = 0.0
    w = rng.uniform(1, 2, m)
    np.testing.assert_allclose(compiled.block_energies(h, f, w), _kernels_py.block_energies(h, f, w), rtol=1e-12)


def test_dispatch_and_forced_fallback():
    assert kernels.BACKEND == "compiled"
    env = {**os.environ, "LAGSPEC_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "import lagspec.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
