import numpy as np
import pytest

from lagspec.field import SpectralField, dealias_mask


def band_limited(n, length, seed, kmax=None, scale=1.0):
    """Mean-zero random trigonometric polynomial inside the dealiased band."""
    rng = np.random.default_rng(seed)
    m = n // 2 + 1
    hat = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * n * scale
    hat[0] = 0.0
    hat[~dealias_mask(n)] = 0.0
    if kmax is not None:
        hat[kmax + 1:] = 0.0
    return SpectralField.from_hat(hat, length, n)


@pytest.fixture
def rand_field():
    return band_limited
