import numpy as np
import pytest

from app.linalg.matcore import householder_qr, mat_mul, symmetrize
from app.utils.prng import generator


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def random_symmetric():
    """Fabrique de matrices symétriques gaussiennes reproductibles"""

    def make(n: int, seed: int = 0) -> np.ndarray:
        g = generator(seed).standard_normal((n, n))
        return symmetrize(g) / np.sqrt(n)

    return make


@pytest.fixture
def random_orthogonal():
    def make(n: int, seed: int = 0) -> np.ndarray:
        q, _ = householder_qr(generator(seed, 7).standard_normal((n, n)))
        return q

    return make


@pytest.fixture
def spd_with_spectrum(random_orthogonal):
    """Q·diag(values)·Qᵀ pour un Q orthogonal aléatoire"""

    def make(values, seed: int = 0) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        q = random_orthogonal(values.size, seed)
        return symmetrize(mat_mul(q * values, q.T))

    return make
