"""
Unit tests for complex levels, complex pairs and their validation
"""
import numpy as np
import pytest

from src.core.complex_pair import (
    ComplexLevel,
    ComplexPair,
    complex_residual,
    dual_complex_residual,
    pairing_norm,
    range_lift,
    sample_pairing_bound,
    validate,
)
from src.core.errors import NotInDomainError, StructureError
from src.core.linalg import InnerProductSpace
from src.core.synthetic import zero_pair


def make_escaping_pair():
    """A_0 maps into W_1 outside the domain D_1"""
    W0, W1, W2 = (InnerProductSpace.euclidean(n) for n in (2, 3, 2))
    A0 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    first = ComplexLevel.from_operators(0, W0, W1, inj_D=np.eye(2), inj_Dt=np.eye(3),
                                        A=A0, At=np.zeros((2, 3)))
    second = ComplexLevel.from_operators(1, W1, W2, inj_D=np.eye(3)[:, [0]], inj_Dt=np.eye(2),
                                         A=np.zeros((2, 1)), At=np.zeros((3, 2)))
    return ComplexPair((first, second), label="escaping")


class TestComplexLevel:
    def test_rejects_mismatched_operator_rows(self):
        W = InnerProductSpace.euclidean(2)
        with pytest.raises(StructureError):
            ComplexLevel.from_operators(0, W, W, inj_D=np.eye(3), inj_Dt=np.eye(2),
                                        A=np.zeros((2, 3)), At=np.zeros((2, 2)))

    def test_graph_gram(self, synthetic_pair):
        lv = synthetic_pair[0]
        expected = lv.inj_D.T @ lv.W.gram @ lv.inj_D + lv.A.T @ lv.W_next.gram @ lv.A
        assert np.allclose(lv.D.gram, expected)
        assert max(lv.graph_gram_residuals()) <= 1e-12

    def test_pairing_matrix_formula(self, synthetic_pair):
        lv = synthetic_pair[1]
        B = lv.A.T @ lv.W_next.gram @ lv.inj_Dt - lv.inj_D.T @ lv.W.gram @ lv.At
        assert np.allclose(lv.pairing.matrix, B)
        x, y = np.ones(lv.D.dim), np.ones(lv.Dt.dim)
        assert lv.pairing(x, y) == pytest.approx(float(x @ B @ y))


class TestComplexPair:
    def test_indexing(self, synthetic_pair):
        assert synthetic_pair.indices() == [0, 1, 2]
        assert synthetic_pair.level(5) is None
        with pytest.raises(KeyError):
            synthetic_pair[-1]

    def test_rejects_gaps(self, synthetic_pair):
        with pytest.raises(StructureError):
            ComplexPair((synthetic_pair[0], synthetic_pair[2]))

    def test_rejects_mismatched_spaces(self, synthetic_pair, cube1_pair):
        with pytest.raises(StructureError):
            ComplexPair((synthetic_pair[0], cube1_pair[1]))

    def test_lift_matrix_reproduces_operator(self, synthetic_pair):
        lift = synthetic_pair.lift_matrix(0)
        assert np.allclose(synthetic_pair[1].inj_D @ lift, synthetic_pair[0].A, atol=1e-10)

    def test_complex_residuals_are_small(self, synthetic_pair):
        for k in synthetic_pair.indices():
            assert complex_residual(synthetic_pair, k) <= 1e-12
            assert dual_complex_residual(synthetic_pair, k) <= 1e-12

    def test_operator_outside_domain_does_not_lift(self):
        with pytest.raises(NotInDomainError):
            range_lift(make_escaping_pair(), 0, np.eye(2))


class TestValidate:
    def test_synthetic_pair_passes(self, synthetic_pair, tol):
        report = validate(synthetic_pair, tol)
        assert report.passed, [r.name for r in report.failed()]
        assert report.seed == tol.seed

    def test_zero_pair_passes(self, tol):
        assert validate(zero_pair(), tol).passed

    def test_escaping_pair_fails_range_lift(self, tol):
        report = validate(make_escaping_pair(), tol)
        assert not report.passed
        assert ("range_lift", 0) in {(r.name, r.level) for r in report.failed()}

    def test_payload_is_sorted_without_timing(self, synthetic_pair, tol):
        payload = validate(synthetic_pair, tol).payload()
        assert all("seconds" not in entry for entry in payload)
        levels = [entry["level"] for entry in payload]
        assert levels == sorted(levels)


class TestPairingBound:
    def test_norm_is_at_most_one(self, synthetic_pair):
        for lv in synthetic_pair.levels:
            assert pairing_norm(lv) <= 1.0 + 1e-12

    def test_samples_never_violate(self, cube1_pair):
        violations, worst = sample_pairing_bound(cube1_pair[1], 500, seed=5)
        assert violations == 0
        assert worst <= 1.0 + 1e-12

    def test_sampling_is_reproducible(self, synthetic_pair):
        lv = synthetic_pair[0]
        assert sample_pairing_bound(lv, 100, 9) == sample_pairing_bound(lv, 100, 9)
