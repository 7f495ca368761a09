"""
Unit tests for tetrahedral mesh generation and boundary bookkeeping
"""
import json

import numpy as np
import pytest

from src.core.errors import MeshError, SchemaError
from src.fem.mesh import (
    EXPECTED_BOUNDARY_COMPONENTS,
    EXPECTED_EULER,
    build_mesh,
    load_mesh,
    save_mesh,
    TetMesh,
)

REFERENCE_VERTICES = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]


def make_mesh(tets=((0, 1, 2, 3),), vertices=REFERENCE_VERTICES):
    return TetMesh.from_arrays(vertices, [list(t) for t in tets])


class TestBuildMesh:
    def test_unit_cube_counts(self):
        mesh = build_mesh("cube", 1)
        assert mesh.counts == {"V": 8, "E": 19, "F": 18, "T": 6}
        assert int(mesh.boundary_faces.sum()) == 12

    def test_cube_n2_has_single_interior_vertex(self):
        mesh = build_mesh("cube", 2)
        assert mesh.n_vertices == 27
        assert mesh.n_tets == 48
        assert int(mesh.boundary_faces.sum()) == 48
        assert mesh.interior("vertex") == [13]

    def test_single_tet_counts(self):
        mesh = build_mesh("tet", 1)
        assert mesh.counts == {"V": 4, "E": 6, "F": 4, "T": 1}
        assert mesh.interior("vertex") == []
        assert mesh.interior("tet") == [0]

    @pytest.mark.parametrize("domain,n", [("cube", 1), ("cube", 2), ("tet", 1), ("cavity", 3), ("hole", 3)])
    def test_euler_characteristic(self, domain, n):
        assert build_mesh(domain, n).euler == EXPECTED_EULER[domain]

    @pytest.mark.parametrize("domain,n", [("cube", 2), ("tet", 1), ("cavity", 3), ("hole", 3)])
    def test_boundary_components(self, domain, n):
        assert build_mesh(domain, n).boundary_components == EXPECTED_BOUNDARY_COMPONENTS[domain]

    def test_all_tets_positively_oriented(self):
        mesh = build_mesh("hole", 3)
        assert np.all(mesh.volumes > 0)
        assert mesh.volumes.sum() == pytest.approx(1.0 - 3 * (1 / 27))

    def test_cavity_rejects_even_n(self):
        with pytest.raises(MeshError):
            build_mesh("cavity", 2)

    def test_hole_rejects_small_n(self):
        with pytest.raises(MeshError):
            build_mesh("hole", 2)

    def test_rejects_unknown_domain_and_bad_n(self):
        with pytest.raises(MeshError):
            build_mesh("sphere", 1)
        with pytest.raises(MeshError):
            build_mesh("cube", 0)
        with pytest.raises(MeshError):
            build_mesh("cube", True)


class TestFromArrays:
    def test_negative_tet_is_flipped(self):
        mesh = make_mesh(tets=[(0, 2, 1, 3)])
        assert mesh.tets[0].tolist() == [0, 2, 3, 1]
        assert mesh.volumes[0] == pytest.approx(1 / 6)

    def test_input_arrays_are_not_modified(self):
        tets = np.array([[0, 2, 1, 3]])
        TetMesh.from_arrays(REFERENCE_VERTICES, tets)
        assert tets.tolist() == [[0, 2, 1, 3]]

    def test_unused_vertices_are_dropped(self):
        vertices = REFERENCE_VERTICES + [[5.0, 5.0, 5.0]]
        mesh = TetMesh.from_arrays(vertices, [[0, 1, 2, 3]])
        assert mesh.n_vertices == 4

    def test_degenerate_tet_raises(self):
        flat = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]
        with pytest.raises(MeshError):
            TetMesh.from_arrays(flat, [[0, 1, 2, 3]])

    def test_repeated_vertex_raises(self):
        with pytest.raises(MeshError):
            make_mesh(tets=[(0, 1, 1, 3)])

    def test_bad_shapes_raise(self):
        with pytest.raises(MeshError):
            TetMesh.from_arrays([[0.0, 0.0]], [[0, 1, 2, 3]])
        with pytest.raises(MeshError):
            TetMesh.from_arrays(REFERENCE_VERTICES, [[0, 1, 2]])
        with pytest.raises(MeshError):
            TetMesh.from_arrays(REFERENCE_VERTICES, [[0, 1, 2, 9]])

    def test_tets_sharing_only_an_edge_are_not_manifold(self):
        vertices = REFERENCE_VERTICES + [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]
        with pytest.raises(MeshError):
            TetMesh.from_arrays(vertices, [[0, 1, 2, 3], [0, 1, 4, 5]])


class TestCombinatorics:
    def test_edges_and_faces_are_sorted(self):
        mesh = build_mesh("cube", 2)
        assert np.all(mesh.edges[:, 0] < mesh.edges[:, 1])
        assert np.all(np.diff(mesh.faces, axis=1) > 0)

    def test_face_edges_match_face_vertices(self):
        mesh = build_mesh("cube", 1)
        for face, (e_bc, e_ac, e_ab) in zip(mesh.faces, mesh.face_edges):
            a, b, c = face
            assert mesh.edges[e_bc].tolist() == [b, c]
            assert mesh.edges[e_ac].tolist() == [a, c]
            assert mesh.edges[e_ab].tolist() == [a, b]

    def test_every_face_has_one_or_two_tets(self):
        mesh = build_mesh("cavity", 3)
        assert set(np.unique(mesh.face_tet_count).tolist()) == {1, 2}

    def test_edge_index_rejects_missing_edge(self):
        mesh = build_mesh("cube", 1)
        with pytest.raises(MeshError):
            mesh.edge_index([[0, 100]])

    def test_interior_rejects_unknown_kind(self):
        with pytest.raises(MeshError):
            build_mesh("tet", 1).interior("cell")


class TestMeshIO:
    def test_save_and_load_keep_counts(self, tmp_path):
        mesh = build_mesh("cube", 2)
        path = tmp_path / "cube.json"
        save_mesh(mesh, str(path))
        loaded = load_mesh(str(path))
        assert loaded.counts == mesh.counts
        assert loaded.domain == "cube"
        assert np.array_equal(loaded.tets, mesh.tets)

    def test_missing_file_raises_schema_error(self, tmp_path):
        with pytest.raises(SchemaError):
            load_mesh(str(tmp_path / "absent.json"))

    def test_wrong_schema_raises(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"schema": "something-else", "vertices": [], "tets": []}))
        with pytest.raises(SchemaError):
            load_mesh(str(path))
