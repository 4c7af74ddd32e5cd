"""Hot-kernel dispatch: compiled extension when built, NumPy otherwise.

Set ``LAGSPEC_PURE_PYTHON=1`` to force the NumPy path.

Only the fused ring reduction is taken from the extension. The two
elementwise kernels are memory bound and NumPy's vectorized loops beat the
scalar compiled loops (see ``benchmarks/bench_kernels.py``), so they stay on
NumPy in both modes; the compiled versions are kept for the benchmark and
the parity tests.
"""
import os

from . import _kernels_py

if os.environ.get("LAGSPEC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

gamma_remainder = _kernels_py.gamma_remainder
etd_apply = _kernels_py.etd_apply
block_energies = _impl.block_energies
