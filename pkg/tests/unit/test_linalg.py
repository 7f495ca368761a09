"""
Unit tests for Gram-metric linear algebra: spaces, subspaces, quotients and dual norms
"""
import warnings

import numpy as np
import pytest

from src.core.errors import ConfigurationError, RankInstabilityWarning, StructureError
from src.core.linalg import (
    DualVector,
    InnerProductSpace,
    QuotientSpace,
    Subspace,
    annihilator,
    bilinear_norm,
    dual_norm,
    kernel_of,
    numerical_rank,
    operator_norm,
    orthogonal_projector,
    riesz_representative,
    subspace_residuals,
)


def make_space(n=4, seed=3):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    g = q @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ q.T
    return InnerProductSpace(0.5 * (g + g.T), name="W")


class TestNumericalRank:
    def test_rank_of_deficient_matrix(self):
        mat = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]])
        assert numerical_rank(mat).rank == 1

    def test_tiny_singular_value_counts_as_zero(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", RankInstabilityWarning)
            assert numerical_rank(np.diag([1.0, 1e-20])).rank == 1

    def test_value_near_threshold_warns_and_counts_as_nonzero(self):
        with pytest.warns(RankInstabilityWarning):
            info = numerical_rank(np.diag([1.0, 5e-13]))
        assert info.rank == 2
        assert info.unstable

    def test_empty_matrix(self):
        assert numerical_rank(np.zeros((0, 3))).rank == 0

    def test_kernel_of(self):
        kernel = kernel_of(np.array([[1.0, 1.0, 0.0]]))
        assert kernel.dim == 2
        assert np.allclose(np.array([[1.0, 1.0, 0.0]]) @ kernel.basis, 0.0, atol=1e-14)


class TestInnerProductSpace:
    def test_rejects_asymmetric_gram(self):
        with pytest.raises(ConfigurationError):
            InnerProductSpace(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_non_square_gram(self):
        with pytest.raises(StructureError):
            InnerProductSpace(np.ones((2, 3)))

    def test_indefinite_gram_fails_factorization(self):
        space = InnerProductSpace(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ConfigurationError):
            space.check_spd()

    def test_whiten_turns_gram_norm_into_euclidean(self):
        space = make_space()
        x = np.arange(4.0)
        assert np.linalg.norm(space.whiten(x)) == pytest.approx(space.norm(x))
        assert np.allclose(space.unwhiten(space.whiten(x)), x)

    def test_dual_vector_length_is_checked(self):
        with pytest.raises(StructureError):
            DualVector(make_space(), np.ones(3))


class TestSubspace:
    def test_rejects_dependent_columns(self):
        space = InnerProductSpace.euclidean(3)
        with pytest.raises(StructureError):
            Subspace(space, np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]]))

    def test_complement_is_gram_orthogonal(self):
        space = make_space()
        sub = Subspace(space, np.eye(4)[:, :2])
        comp = sub.complement()
        assert comp.dim == 2
        assert np.allclose(comp.basis.T @ space.gram @ sub.basis, 0.0, atol=1e-12)

    def test_intersection(self):
        space = InnerProductSpace.euclidean(3)
        first = Subspace(space, np.eye(3)[:, [0, 1]])
        second = Subspace(space, np.eye(3)[:, [1, 2]])
        both = first.intersect(second)
        assert both.dim == 1
        assert abs(both.orthonormal()[1, 0]) == pytest.approx(1.0)

    def test_contains(self):
        space = make_space()
        sub = Subspace(space, np.eye(4)[:, :2])
        assert sub.contains(np.array([1.0, -2.0, 0.0, 0.0]))
        assert not sub.contains(np.array([0.0, 0.0, 1.0, 0.0]))

    def test_projector_is_gram_orthogonal(self):
        space = make_space()
        P = orthogonal_projector(space, Subspace(space, np.eye(4)[:, [0, 3]]))
        assert np.allclose(P @ P, P, atol=1e-12)
        assert np.allclose(space.gram @ P, (space.gram @ P).T, atol=1e-12)

    def test_subspace_residuals_need_same_ambient(self):
        with pytest.raises(StructureError):
            subspace_residuals(np.eye(3)[:, :1], np.eye(4)[:, :1])


class TestQuotientSpace:
    def test_quotient_norm_ignores_kernel(self):
        space = make_space()
        kernel = Subspace(space, np.array([[1.0], [1.0], [0.0], [0.0]]))
        quotient = QuotientSpace.of(kernel)
        assert quotient.dim == 3
        assert quotient.norm(kernel.basis[:, 0]) == pytest.approx(0.0, abs=1e-12)
        x = np.array([0.5, -1.0, 2.0, 1.0])
        assert quotient.norm(x) <= space.norm(x) + 1e-12
        assert quotient.norm(x + 3.0 * kernel.basis[:, 0]) == pytest.approx(quotient.norm(x))
        assert quotient.orthogonality_residual() < 1e-12

    def test_lift_is_minimal_representative(self):
        space = make_space()
        quotient = QuotientSpace.of(Subspace(space, np.eye(4)[:, :1]))
        x = np.array([3.0, 1.0, -1.0, 2.0])
        rep = quotient.lift(quotient.coords(x))
        assert space.norm(rep) == pytest.approx(quotient.norm(x))


class TestDuality:
    def test_dual_norm_equals_riesz_norm(self):
        space = make_space()
        phi = np.array([1.0, -2.0, 0.5, 0.0])
        assert dual_norm(space, phi) == pytest.approx(space.norm(riesz_representative(space, phi)))

    def test_annihilator_kills_subspace(self):
        space = make_space(5)
        sub = Subspace(space, np.eye(5)[:, :2] + 0.1)
        ann = annihilator(sub)
        assert ann.dim == 3
        assert np.allclose(ann.basis.T @ sub.basis, 0.0, atol=1e-12)
        assert ann.contains(ann.basis[:, 0])

    def test_norms_with_euclidean_spaces(self):
        left, right = InnerProductSpace.euclidean(2), InnerProductSpace.euclidean(3)
        mat = np.array([[3.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        assert bilinear_norm(left, right, mat) == pytest.approx(3.0)
        assert operator_norm(right, left, mat) == pytest.approx(3.0)


class TestClosedFormValues:
    """손으로 계산한 값과 비교"""

    def test_projector_under_weighted_gram(self):
        space = InnerProductSpace(np.diag([1.0, 4.0]))
        P = orthogonal_projector(space, Subspace(space, np.array([[1.0], [1.0]])))
        # B (BᵀGB)⁻¹ BᵀG = [1,1]ᵀ [1,4] / 5
        assert np.allclose(P, np.array([[1.0, 4.0], [1.0, 4.0]]) / 5.0, atol=1e-15)

    def test_dual_norm_under_weighted_gram(self):
        space = InnerProductSpace(np.diag([2.0, 8.0]))
        assert dual_norm(space, np.array([1.0, 1.0])) == pytest.approx(np.sqrt(0.625), rel=1e-14)
        assert riesz_representative(space, np.array([1.0, 1.0])) == pytest.approx([0.5, 0.125])

    def test_kernel_of_rank_one_matrix(self):
        kernel = kernel_of(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert kernel.dim == 1
        direction = kernel.basis[:, 0] / np.linalg.norm(kernel.basis[:, 0])
        assert abs(direction @ np.array([1.0, -1.0]) / np.sqrt(2.0)) == pytest.approx(1.0, abs=1e-14)


class TestRandomizedIdentities:
    def test_large_projector_is_idempotent_and_self_adjoint(self):
        space = make_space(200, seed=11)
        rng = np.random.default_rng(12)
        P = orthogonal_projector(space, Subspace(space, rng.standard_normal((200, 70))))
        GP = space.gram @ P
        assert np.linalg.norm(P @ P - P) <= 1e-10 * np.linalg.norm(P)
        assert np.linalg.norm(GP - GP.T) <= 1e-10 * np.linalg.norm(GP)
        assert np.trace(P) == pytest.approx(70.0, abs=1e-8)

    def test_annihilator_sweep(self):
        rng = np.random.default_rng(21)
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            d = int(rng.integers(0, n + 1))
            space = make_space(n, seed=int(rng.integers(1 << 30)))
            sub = Subspace(space, rng.standard_normal((n, d)))
            ann = annihilator(sub)
            assert ann.dim == n - d
            if ann.dim and d:
                assert np.abs(ann.basis.T @ sub.basis).max() <= 1e-12 * max(np.abs(sub.basis).max(), 1.0)

    def test_riesz_sweep(self):
        rng = np.random.default_rng(22)
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            space = make_space(n, seed=int(rng.integers(1 << 30)))
            phi = rng.standard_normal(n)
            rep = riesz_representative(space, phi)
            norm = dual_norm(space, phi)
            assert space.norm(rep) == pytest.approx(norm, rel=1e-12)
            # φ(r) = ‖φ‖'²
            assert phi @ rep == pytest.approx(norm ** 2, rel=1e-10)
            x = rng.standard_normal(n)
            assert abs(phi @ x) <= norm * space.norm(x) * (1.0 + 1e-12)
