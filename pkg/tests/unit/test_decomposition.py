"""
Unit tests for regular decompositions, extended surface operators and range characterizations
"""
import numpy as np
import pytest

from src.core.errors import NoDecompositionError, StructureError
from src.regular.decomposition import (
    DUAL,
    PRIMAL,
    build_regular,
    check_dual_characterization,
    check_range_characterization,
    decompose_trace,
    decomposition_records,
    extend_surface_op,
    full_bases,
    full_regular_bases,
    regular_levels,
    side_data,
)
from src.traces.surface_ops import build_all
from src.traces.trace_system import PRIMAL as TRACE_PRIMAL, trace_apply


def make_regular(pair, side, k, tol):
    basis_a, basis_b = full_bases(pair, side, k, tol)
    return build_regular(pair, k, basis_a, basis_b, side=side, tol=tol)


class TestSideData:
    def test_primal_side_spaces(self, cube1_pair):
        data = side_data(cube1_pair, PRIMAL, 0)
        assert data.X.dim == cube1_pair[0].Dt.dim
        assert data.Y.dim == cube1_pair[1].Dt.dim
        assert data.op.shape == (data.X.dim, data.Y.dim)

    def test_dual_side_needs_next_level(self, synthetic_pair):
        with pytest.raises(StructureError):
            side_data(synthetic_pair, DUAL, 2)

    def test_unknown_side(self, synthetic_pair):
        with pytest.raises(StructureError):
            side_data(synthetic_pair, "both", 0)

    def test_regular_levels(self, synthetic_pair):
        levels = regular_levels(synthetic_pair)
        assert levels == [(PRIMAL, 0), (PRIMAL, 1), (PRIMAL, 2), (DUAL, 0), (DUAL, 1)]
        assert set(full_regular_bases(synthetic_pair)) == set(levels)


class TestBuildRegular:
    @pytest.mark.parametrize("side,k", [(PRIMAL, 0), (PRIMAL, 1), (DUAL, 0), (DUAL, 1)])
    def test_full_bases_decompose(self, synthetic_pair, tol, side, k):
        reg = make_regular(synthetic_pair, side, k, tol)
        assert all(r.passed for r in decomposition_records(reg, tol))
        x = np.random.default_rng(k).standard_normal(reg.data.X.dim)
        rebuilt = reg.lifting @ x + reg.data.op @ (reg.potential @ x)
        assert np.allclose(rebuilt, x, atol=1e-10)

    def test_empty_subspaces_cannot_decompose(self, synthetic_pair, tol):
        data = side_data(synthetic_pair, PRIMAL, 0, tol)
        with pytest.raises(NoDecompositionError):
            build_regular(synthetic_pair, 0, np.zeros((data.X.dim, 0)), np.zeros((data.Y.dim, 0)),
                          side=PRIMAL, tol=tol)

    def test_extension_agrees_with_surface_operator(self, cube1_pair, cube1_sops, tol):
        reg = make_regular(cube1_pair, PRIMAL, 0, tol)
        ext = extend_surface_op(cube1_sops[0], reg, tol=tol)
        assert ext.consistency <= 1e-10
        assert ext.continuity <= 1.0 + 1e-12


class TestCharacterizations:
    @pytest.mark.parametrize("side", [PRIMAL, DUAL])
    def test_dual_characterization(self, synthetic_pair, tol, side):
        reg = make_regular(synthetic_pair, side, 0, tol)
        result, records = check_dual_characterization(synthetic_pair, reg, tol=tol)
        assert result.spanning
        assert result.lower > 0.0
        assert all(r.passed for r in records)

    @pytest.mark.parametrize("side", [PRIMAL, DUAL])
    def test_range_characterization_with_full_bases(self, synthetic_pair, synthetic_traces, tol, side):
        sops = build_all(synthetic_pair, synthetic_traces, tol)
        reg = make_regular(synthetic_pair, side, 0, tol)
        result, records = check_range_characterization(synthetic_traces, reg, tol=tol, sops=sops)
        assert result.spanning
        assert result.canonical_bijective
        assert result.characterized_dim == result.range_dim
        assert all(r.passed for r in records), [r.name for r in records if not r.passed]

    def test_range_characterization_on_derham(self, cube1_pair, cube1_traces, cube1_sops, tol):
        reg = make_regular(cube1_pair, PRIMAL, 1, tol)
        result, records = check_range_characterization(cube1_traces, reg, tol=tol, sops=cube1_sops)
        assert result.residual <= 1e-8
        assert all(r.passed for r in records), [r.name for r in records if not r.passed]


class TestDecomposeTrace:
    def test_trace_splits_into_lifting_and_potential(self, cube1_pair, cube1_traces, tol):
        reg = make_regular(cube1_pair, DUAL, 0, tol)
        ts = cube1_traces[1]
        x = ts.Q_primal.complement_basis @ np.random.default_rng(3).standard_normal(ts.Q_primal.dim)
        split = decompose_trace(cube1_pair, cube1_traces, reg, trace_apply(ts, TRACE_PRIMAL, x), tol)
        assert split.residual <= 1e-8

    def test_needs_dual_side(self, cube1_pair, cube1_traces, tol):
        reg = make_regular(cube1_pair, PRIMAL, 0, tol)
        with pytest.raises(StructureError):
            decompose_trace(cube1_pair, cube1_traces, reg, np.zeros(reg.data.X.dim), tol)
