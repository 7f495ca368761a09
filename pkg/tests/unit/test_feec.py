"""
Unit tests for lowest-order finite element spaces, masses and boundary integrals
"""
import numpy as np
import pytest

from src.core.errors import StructureError
from src.fem.feec import boundary_quadrature, green_boundary_form


class TestIncidences:
    def test_sequences_are_exact(self, cube2_feec):
        assert cube2_feec.exactness_residuals() == (0, 0)

    def test_gradient_kills_constants(self, cube1_feec):
        assert np.array_equal(cube1_feec.G @ np.ones(cube1_feec.mesh.n_vertices),
                              np.zeros(cube1_feec.mesh.edges.shape[0]))

    def test_incidence_shapes(self, cube1_feec):
        c = cube1_feec.mesh.counts
        assert cube1_feec.G.shape == (c["E"], c["V"])
        assert cube1_feec.C.shape == (c["F"], c["E"])
        assert cube1_feec.Dv.shape == (c["T"], c["F"])

    def test_interior_faces_cancel_in_divergence_sum(self, cube2_feec):
        column_sums = cube2_feec.Dv.sum(axis=0)
        interior = cube2_feec.mesh.interior("face")
        assert np.all(column_sums[interior] == 0)


class TestEmbeddings:
    def test_embedding_shapes(self, tet_feec):
        assert tet_feec.E0.shape == (4, 4)
        assert tet_feec.E1.shape == (12, 6)
        assert tet_feec.ER.shape == (12, 4)
        assert tet_feec.E3.shape == (4, 1)

    def test_embeddings_have_full_column_rank(self, cube1_feec):
        for E in (cube1_feec.E0, cube1_feec.E1, cube1_feec.ER, cube1_feec.E3):
            assert np.linalg.matrix_rank(E) == E.shape[1]

    def test_embedded_gradient_is_piecewise_constant(self, tet_feec):
        x = np.array([0.3, -1.2, 2.0, 0.7])
        field = (tet_feec.E1 @ tet_feec.G.astype(float) @ x).reshape(4, 3)
        assert np.allclose(field, field[0], atol=1e-12)


class TestMasses:
    def test_reference_tet_p1_mass(self, tet_feec):
        expected = np.full((4, 4), 1 / 120) + np.eye(4) * (1 / 60 - 1 / 120)
        assert np.allclose(tet_feec.M_P1, expected, atol=1e-15)

    def test_p0_mass_is_inverse_volume(self, cube1_feec):
        assert np.allclose(np.diag(cube1_feec.M_P0), 1.0 / cube1_feec.mesh.volumes)

    def test_mixed_p1_p0_mass(self, cube1_feec):
        mesh = cube1_feec.mesh
        expected = np.zeros((mesh.n_vertices, mesh.n_tets))
        for t, tet in enumerate(mesh.tets):
            expected[tet, t] = 0.25
        assert np.allclose(cube1_feec.M_P1xP0, expected, atol=1e-14)

    @pytest.mark.parametrize("name", ["M_P1", "M_N0", "M_RT0", "M_P0"])
    def test_masses_are_symmetric_positive_definite(self, cube1_feec, name):
        M = getattr(cube1_feec, name)
        assert np.allclose(M, M.T, atol=1e-14)
        assert np.linalg.eigvalsh(M).min() > 0


class TestGreenBoundaryForm:
    def test_divergence_theorem_on_reference_tet(self, tet_feec):
        for f in range(4):
            flux = np.eye(4)[f]
            assert green_boundary_form(tet_feec, 2, flux, np.ones(4)) == pytest.approx(tet_feec.Dv[0, f], abs=1e-12)
            assert green_boundary_form(tet_feec, 0, np.ones(4), flux) == pytest.approx(tet_feec.Dv[0, f], abs=1e-12)

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_matches_pairing_matrix(self, cube1_feec, cube1_pair, k):
        rng = np.random.default_rng(11 + k)
        level = cube1_pair[k]
        quad = boundary_quadrature(cube1_feec.mesh)
        x = rng.standard_normal(level.D.dim)
        y = rng.standard_normal(level.Dt.dim)
        volume = float(x @ level.pairing.matrix @ y)
        assert green_boundary_form(cube1_feec, k, x, y, quad) == pytest.approx(volume, rel=1e-10, abs=1e-12)

    def test_interior_vertex_has_no_boundary_contribution(self, cube2_feec):
        x = np.zeros(cube2_feec.mesh.n_vertices)
        x[13] = 1.0
        y = np.ones(cube2_feec.mesh.faces.shape[0])
        assert green_boundary_form(cube2_feec, 0, x, y) == pytest.approx(0.0, abs=1e-14)

    def test_rejects_top_level(self, tet_feec):
        with pytest.raises(StructureError):
            green_boundary_form(tet_feec, 3, np.ones(1), np.ones(0))
