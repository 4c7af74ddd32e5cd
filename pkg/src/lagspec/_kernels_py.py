"""NumPy reference implementations of the hot kernels."""
import numpy as np


def gamma_remainder(a, gamma):
    a = np.asarray(a, dtype=float)
    return np.expm1(-gamma * np.log1p(a)) / gamma + a


def etd_apply(c00, c01, c10, c11, a, v, s0=None, s1=None, g=None):
    out_a = c00 * a + c01 * v
    out_v = c10 * a + c11 * v
    if g is not None:
        out_a += s0 * g
        out_v += s1 * g
    return out_a, out_v


def block_energies(hat, filters, weights):
    return (np.abs(hat[None, :] * filters) ** 2 * weights).sum(axis=-1)
