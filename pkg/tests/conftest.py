import numpy as np
import pytest


def random_spd(rng, dim, lo=0.5, hi=3.0):
    """Random SPD matrix with spectrum in [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return (q * rng.uniform(lo, hi, dim)) @ q.T


def random_matrix_t_params(rng, c, r, nu=None):
    from matstats import MatrixTParams

    nu = float(rng.uniform(2.5, 15.0)) if nu is None else nu
    return MatrixTParams(rng.standard_normal((c, r)), random_spd(rng, c), random_spd(rng, r), nu)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
