import numpy as np
import pytest

from app.errors import DefinitenessError, ShapeError, SingularityError, SymmetryError
from app.linalg.matcore import (
    MatrixFunction,
    as_mat,
    cholesky_factor,
    cholesky_spd_inverse,
    count_products,
    frob_norm,
    householder_qr,
    identity,
    jacobi_eigendecomposition,
    mat_mul,
    reference_matrix_function,
    reference_svd,
    spectral_norm_estimate,
)


class TestMatMul:
    def test_identity_left(self, rng):
        m = rng.standard_normal((3, 5))
        np.testing.assert_array_equal(mat_mul(identity(3), m), m)

    def test_permutation_swaps_columns(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(mat_mul(a, swap), [[2.0, 1.0], [4.0, 3.0]])

    def test_matches_naive_triple_loop(self, rng):
        a = rng.standard_normal((32, 32))
        b = rng.standard_normal((32, 32))
        naive = np.zeros((32, 32))
        for i in range(32):
            for j in range(32):
                total = 0.0
                for k in range(32):
                    total += a[i, k] * b[k, j]
                naive[i, j] = total
        assert np.max(np.abs(mat_mul(a, b) - naive)) <= 1e-12

    def test_associativity(self, rng):
        a, b, c = (rng.standard_normal((16, 16)) for _ in range(3))
        left = mat_mul(mat_mul(a, b), c)
        right = mat_mul(a, mat_mul(b, c))
        assert frob_norm(left - right) <= 1e-12 * frob_norm(left)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mat_mul(np.ones((2, 3)), np.ones((2, 3)))

    def test_deterministic(self, rng):
        a = rng.standard_normal((20, 20))
        np.testing.assert_array_equal(mat_mul(a, a), mat_mul(a, a))

    def test_count_products(self):
        a = np.ones((4, 4))
        b = np.ones((4, 2))
        with count_products() as log:
            mat_mul(a, a)
            mat_mul(a, b)
        assert log.count() == 2
        assert log.count_square(4) == 1
        # Hors contexte, rien n'est enregistré
        mat_mul(a, a)
        assert log.count() == 2


class TestNorms:
    def test_frobenius_identity(self):
        assert frob_norm(identity(4)) == 2.0

    def test_frobenius_zero(self):
        assert frob_norm(np.zeros((3, 3))) == 0.0

    def test_frobenius_row(self):
        assert frob_norm(np.array([[3.0, 4.0]])) == pytest.approx(5.0, abs=1e-15)

    def test_spectral_estimate_diagonal(self):
        estimate = spectral_norm_estimate(np.diag([3.0, 1.0, 0.5]), iters=100)
        assert estimate == pytest.approx(3.0, abs=1e-8)

    def test_spectral_estimate_identity(self):
        assert spectral_norm_estimate(identity(5)) == pytest.approx(1.0, abs=1e-14)

    def test_spectral_estimate_against_jacobi(self, random_orthogonal):
        values = np.concatenate([[1.5], np.linspace(-1.0, 1.0, 63)])
        q = random_orthogonal(64, seed=3)
        a = mat_mul(q * values, q.T)
        a = 0.5 * (a + a.T)
        reference = np.max(np.abs(jacobi_eigendecomposition(a).values))
        estimate = spectral_norm_estimate(a, iters=200)
        assert abs(estimate - reference) <= 1e-6 * reference
        assert estimate <= reference * (1 + 1e-12)


class TestAsMat:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            as_mat([[1.0, np.nan]])

    def test_rejects_vectors(self):
        with pytest.raises(ShapeError):
            as_mat([1.0, 2.0])


class TestHouseholderQR:
    def test_identity(self):
        q, r = householder_qr(identity(3))
        np.testing.assert_allclose(q, identity(3), atol=1e-15)
        np.testing.assert_allclose(r, identity(3), atol=1e-15)

    def test_scaled_identity_sign_convention(self):
        q, r = householder_qr(2.0 * identity(3))
        np.testing.assert_allclose(r, 2.0 * identity(3), atol=1e-14)
        np.testing.assert_allclose(q, identity(3), atol=1e-14)

    def test_reconstruction(self, rng):
        a = rng.standard_normal((10, 6))
        q, r = householder_qr(a)
        np.testing.assert_allclose(mat_mul(q, r), a, atol=1e-12)
        np.testing.assert_allclose(mat_mul(q.T, q), identity(6), atol=1e-12)
        assert np.all(np.diag(r) >= 0)
        np.testing.assert_allclose(np.tril(r, -1), 0.0, atol=1e-15)

    def test_wide_rejected(self):
        with pytest.raises(ShapeError):
            householder_qr(np.ones((2, 3)))


class TestCholesky:
    def test_diagonal_inverse(self):
        np.testing.assert_allclose(cholesky_spd_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), atol=1e-15)

    def test_identity_inverse(self):
        np.testing.assert_allclose(cholesky_spd_inverse(identity(5)), identity(5), atol=1e-15)

    def test_factor_reconstructs(self, spd_with_spectrum):
        a = spd_with_spectrum(np.linspace(0.5, 3.0, 12), seed=1)
        factor = cholesky_factor(a)
        np.testing.assert_allclose(mat_mul(factor, factor.T), a, atol=1e-12)
        np.testing.assert_allclose(mat_mul(a, cholesky_spd_inverse(a)), identity(12), atol=1e-10)

    def test_indefinite_names_pivot(self):
        with pytest.raises(DefinitenessError) as excinfo:
            cholesky_spd_inverse(np.diag([1.0, -1.0, 2.0]))
        assert excinfo.value.pivot_index == 1

    def test_asymmetric_rejected(self):
        with pytest.raises(SymmetryError):
            cholesky_factor(np.array([[2.0, 1.0], [0.0, 2.0]]))


class TestJacobi:
    def test_diagonal(self):
        spectrum = jacobi_eigendecomposition(np.diag([5.0, 2.0, -1.0]))
        np.testing.assert_allclose(spectrum.values, [5.0, 2.0, -1.0])
        np.testing.assert_allclose(np.abs(spectrum.vectors), identity(3), atol=1e-15)

    def test_swap_matrix(self):
        spectrum = jacobi_eigendecomposition(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(spectrum.values, [1.0, -1.0], atol=1e-15)

    def test_asymmetric_rejected(self):
        with pytest.raises(SymmetryError):
            jacobi_eigendecomposition(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_trace_identities(self, random_symmetric):
        a = random_symmetric(40, seed=5)
        spectrum = jacobi_eigendecomposition(a)
        norm = frob_norm(a)
        assert abs(np.sum(spectrum.values) - np.trace(a)) <= 1e-10 * norm
        assert abs(np.sum(spectrum.values ** 2) - norm ** 2) <= 1e-10 * norm ** 2
        v = spectrum.vectors
        np.testing.assert_allclose(mat_mul(v.T, v), identity(40), atol=1e-12)
        np.testing.assert_allclose(mat_mul(v * spectrum.values, v.T), a, atol=1e-12)
        assert np.all(np.diff(spectrum.values) <= 0)

    def test_odd_dimension(self, random_symmetric):
        a = random_symmetric(7, seed=2)
        spectrum = jacobi_eigendecomposition(a)
        np.testing.assert_allclose(np.sort(spectrum.values), np.linalg.eigvalsh(a), atol=1e-12)


class TestReferenceSVD:
    def test_identity(self):
        u, s, v = reference_svd(identity(4))
        np.testing.assert_allclose(s.values, np.ones(4), atol=1e-15)

    def test_diagonal(self):
        _, s, _ = reference_svd(np.diag([3.0, 0.1]))
        np.testing.assert_allclose(s.values, [3.0, 0.1], rtol=1e-14)

    def test_wide_rejected(self):
        with pytest.raises(ShapeError):
            reference_svd(np.ones((2, 3)))

    def test_tall_gaussian(self, rng):
        a = rng.standard_normal((128, 64))
        u, s, v = reference_svd(a)
        np.testing.assert_allclose(mat_mul(u * s.values, v.T), a, atol=1e-10)
        np.testing.assert_allclose(mat_mul(u.T, u), identity(64), atol=1e-10)
        np.testing.assert_allclose(s.values, np.linalg.svd(a, compute_uv=False), rtol=1e-10)


class TestReferenceMatrixFunction:
    def test_sqrt_diagonal(self):
        np.testing.assert_allclose(
            reference_matrix_function(np.diag([4.0, 9.0]), MatrixFunction.SQRT), np.diag([2.0, 3.0]), atol=1e-14
        )

    def test_sign_diagonal(self):
        np.testing.assert_allclose(
            reference_matrix_function(np.diag([2.0, -0.5]), MatrixFunction.SIGN), np.diag([1.0, -1.0]), atol=1e-15
        )

    def test_inverse_proot(self):
        result = reference_matrix_function(np.diag([8.0, 27.0]), MatrixFunction.INV_PROOT, p=3)
        np.testing.assert_allclose(result, np.diag([0.5, 1.0 / 3.0]), atol=1e-14)

    def test_polar_of_positive_diagonal(self):
        result = reference_matrix_function(np.diag([3.0, 0.5]), MatrixFunction.POLAR)
        np.testing.assert_allclose(result, identity(2), atol=1e-14)

    def test_inverse_of_singular(self):
        with pytest.raises(SingularityError):
            reference_matrix_function(np.diag([1.0, 0.0]), MatrixFunction.INVERSE)

    def test_inverse_sqrt_of_singular(self):
        with pytest.raises(SingularityError):
            reference_matrix_function(np.diag([1.0, 0.0]), MatrixFunction.INV_SQRT)

    def test_inverse_general(self, rng):
        a = np.eye(20) + 0.1 * rng.standard_normal((20, 20))
        np.testing.assert_allclose(mat_mul(a, reference_matrix_function(a, MatrixFunction.INVERSE)), identity(20), atol=1e-10)
