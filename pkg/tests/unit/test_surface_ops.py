"""
Unit tests for surface operators and the commuting relations with traces
"""
import numpy as np
import pytest

from src.core.errors import WellDefinednessViolation
from src.traces.surface_ops import build_all, build_surface_ops, check_commuting, surface_apply


class TestBuildAll:
    def test_levels(self, cube1_sops, synthetic_pair, synthetic_traces, tol):
        assert sorted(cube1_sops) == [0, 1, 2]
        assert sorted(build_all(synthetic_pair, synthetic_traces, tol)) == [0, 1]

    def test_surface_operators_are_transposed_lifts(self, cube1_sops):
        for ops in cube1_sops.values():
            assert np.array_equal(ops.Dt_op, ops.lift_At.T)
            assert np.array_equal(ops.Dn_op, ops.lift_A.T)

    def test_quotient_operator_shapes(self, cube1_sops, cube1_traces):
        ops = cube1_sops[0]
        assert ops.St.shape == (cube1_traces[1].Q_primal.dim, cube1_traces[0].Q_primal.dim)
        assert ops.Sn.shape == (cube1_traces[0].Q_dual.dim, cube1_traces[1].Q_dual.dim)

    def test_apply(self, cube1_sops):
        ops = cube1_sops[1]
        c = np.arange(ops.Dt_op.shape[1], dtype=float)
        assert np.array_equal(surface_apply(ops, "primal", c), ops.Dt_op @ c)
        d = np.arange(ops.Dn_op.shape[1], dtype=float)
        assert np.array_equal(surface_apply(ops, "dual", d), ops.Dn_op @ d)


class TestCommuting:
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_derham_relations(self, cube1_pair, cube1_traces, cube1_sops, tol, k):
        records = check_commuting(cube1_pair, cube1_traces, cube1_sops[k], k, tol)
        assert all(r.passed for r in records), [r.name for r in records if not r.passed]

    def test_synthetic_relations(self, synthetic_pair, synthetic_traces, tol):
        for k, ops in build_all(synthetic_pair, synthetic_traces, tol).items():
            records = check_commuting(synthetic_pair, synthetic_traces, ops, k, tol)
            assert all(r.passed for r in records), [r.name for r in records if not r.passed]

    def test_surface_gradient_then_curl_vanishes(self, cube1_sops):
        prod = cube1_sops[1].St @ cube1_sops[0].St
        assert np.linalg.norm(prod) <= 1e-10 * max(np.linalg.norm(cube1_sops[0].St), 1.0)

    def test_kernel_escape_raises(self, mocker, cube1_pair, cube1_traces, tol):
        mocker.patch("src.traces.surface_ops._kernel_escape", return_value=1.0)
        with pytest.raises(WellDefinednessViolation):
            build_surface_ops(cube1_pair, cube1_traces, 0, tol)
