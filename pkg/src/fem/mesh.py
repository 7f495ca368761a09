"""
사면체 메쉬 모듈
Kuhn 6분할 격자 메쉬 생성, 모서리/면 열거, 경계 표시, 경계 연결성분, JSON 입출력
"""

import json
import os
from dataclasses import dataclass
from functools import cached_property
from itertools import permutations
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from src.core.errors import MeshError, SchemaError
from src.core.instance_io import canonical_json

SCHEMA = "tet-mesh/v1"
DOMAINS = ("cube", "cavity", "hole", "tet")

# 오름차순 정렬된 사면체 (v0<v1<v2<v3) 의 국소 모서리/면
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
# 경계 ∂[v0 v1 v2 v3] 에서 LOCAL_FACES 각 면의 부호 (빠진 꼭짓점 i 에 대해 (-1)^i)
FACE_SIGNS = (-1, 1, -1, 1)

EXPECTED_EULER = {"cube": 1, "tet": 1, "cavity": 2, "hole": 0}
EXPECTED_BOUNDARY_COMPONENTS = {"cube": 1, "tet": 1, "cavity": 2, "hole": 1}


def _signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = vertices[tets]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=-1)
    return np.linalg.det(jac) / 6.0


def _keys(rows: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(rows.shape[0], dtype=np.int64)
    for col in range(rows.shape[1]):
        out = out * base + rows[:, col].astype(np.int64)
    return out


@dataclass(frozen=True, eq=False)
class TetMesh:
    """
    사면체 메쉬

    tets 는 양의 방향으로 저장. 모서리/면은 정점 번호 오름차순으로 전역 방향을 가진다.
    """
    vertices: np.ndarray
    tets: np.ndarray
    domain: str = ""
    n: int = 0

    @classmethod
    def from_arrays(cls, vertices, tets, domain: str = "", n: int = 0) -> "TetMesh":
        """
        배열로부터 메쉬 생성 (음의 방향 사면체는 두 꼭짓점을 바꿔 뒤집음)

        Raises:
            MeshError: 모양이 잘못되었거나 부피가 0 인 사면체
        """
        vertices = np.array(vertices, dtype=float)
        tets = np.array(tets, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must have shape (V, 3), got {vertices.shape}")
        if tets.ndim != 2 or tets.shape[1] != 4 or tets.shape[0] == 0:
            raise MeshError(f"tets must have shape (T, 4) with T > 0, got {tets.shape}")
        if tets.min() < 0 or tets.max() >= vertices.shape[0]:
            raise MeshError(f"tet indices out of range [0, {vertices.shape[0]})")
        if np.any(np.sort(tets, axis=1)[:, 1:] == np.sort(tets, axis=1)[:, :-1]):
            raise MeshError("a tet repeats a vertex")

        vol = _signed_volumes(vertices, tets)
        scale = np.ptp(vertices, axis=0).max() if vertices.size else 1.0
        degenerate = np.abs(vol) <= 1e-14 * max(scale, 1e-300) ** 3
        if degenerate.any():
            raise MeshError(f"degenerate tet {int(np.flatnonzero(degenerate)[0])} (zero volume)")
        flip = vol < 0
        tets[flip, 2], tets[flip, 3] = tets[flip, 3].copy(), tets[flip, 2].copy()

        used = np.unique(tets)
        if used.size != vertices.shape[0]:
            renumber = np.full(vertices.shape[0], -1, dtype=np.int64)
            renumber[used] = np.arange(used.size)
            vertices, tets = vertices[used], renumber[tets]

        vertices.setflags(write=False)
        tets.setflags(write=False)
        mesh = cls(vertices, tets, domain, n)
        mesh.check_manifold()
        return mesh

    # ─── Combinatorics ──────────────────────────────────────────────────────

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_tets(self) -> int:
        return self.tets.shape[0]

    @cached_property
    def sorted_tets(self) -> np.ndarray:
        return np.sort(self.tets, axis=1)

    @cached_property
    def _edge_data(self) -> Tuple[np.ndarray, np.ndarray]:
        st = self.sorted_tets
        local = np.stack([st[:, list(e)] for e in LOCAL_EDGES], axis=1).reshape(-1, 2)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        return edges, inverse.reshape(self.n_tets, len(LOCAL_EDGES))

    @cached_property
    def _face_data(self) -> Tuple[np.ndarray, np.ndarray]:
        st = self.sorted_tets
        local = np.stack([st[:, list(f)] for f in LOCAL_FACES], axis=1).reshape(-1, 3)
        faces, inverse = np.unique(local, axis=0, return_inverse=True)
        return faces, inverse.reshape(self.n_tets, len(LOCAL_FACES))

    @property
    def edges(self) -> np.ndarray:
        return self._edge_data[0]

    @property
    def tet_edges(self) -> np.ndarray:
        """(T, 6) LOCAL_EDGES 순서의 전역 모서리 번호"""
        return self._edge_data[1]

    @property
    def faces(self) -> np.ndarray:
        return self._face_data[0]

    @property
    def tet_faces(self) -> np.ndarray:
        """(T, 4) LOCAL_FACES 순서의 전역 면 번호"""
        return self._face_data[1]

    def edge_index(self, pairs) -> np.ndarray:
        """정렬된 정점 쌍 → 전역 모서리 번호"""
        pairs = np.atleast_2d(np.asarray(pairs, dtype=np.int64))
        keys = _keys(self.edges, self.n_vertices)
        wanted = _keys(pairs, self.n_vertices)
        idx = np.searchsorted(keys, wanted)
        if np.any(idx >= keys.size) or np.any(keys[np.minimum(idx, keys.size - 1)] != wanted):
            raise MeshError("edge is not part of the mesh")
        return idx

    @cached_property
    def face_edges(self) -> np.ndarray:
        """(F, 3) 면 (a,b,c) 의 모서리 (b,c), (a,c), (a,b)"""
        f = self.faces
        return np.stack([self.edge_index(f[:, [1, 2]]),
                         self.edge_index(f[:, [0, 2]]),
                         self.edge_index(f[:, [0, 1]])], axis=1)

    @cached_property
    def orientation(self) -> np.ndarray:
        """정렬된 꼭짓점 순서의 방향 부호 (+1/-1)"""
        return np.sign(_signed_volumes(self.vertices, self.sorted_tets)).astype(np.int64)

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.abs(_signed_volumes(self.vertices, self.tets))

    @cached_property
    def face_tet_count(self) -> np.ndarray:
        return np.bincount(self.tet_faces.ravel(), minlength=self.faces.shape[0])

    # ─── Boundary ───────────────────────────────────────────────────────────

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        return self.face_tet_count == 1

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        flags = np.zeros(self.edges.shape[0], dtype=bool)
        flags[self.face_edges[self.boundary_faces].ravel()] = True
        return flags

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[self.faces[self.boundary_faces].ravel()] = True
        return flags

    def check_manifold(self) -> None:
        """
        Raises:
            MeshError: 세 개 이상의 사면체가 공유하는 면, 또는 경계면 두 개에 속하지 않는 경계 모서리
        """
        if np.any(self.face_tet_count > 2):
            bad = int(np.flatnonzero(self.face_tet_count > 2)[0])
            raise MeshError(f"face {bad} is shared by {int(self.face_tet_count[bad])} tets")
        per_edge = np.bincount(self.face_edges[self.boundary_faces].ravel(), minlength=self.edges.shape[0])
        bad = np.flatnonzero(self.boundary_edges & (per_edge != 2))
        if bad.size:
            raise MeshError(f"non-manifold boundary at edge {int(bad[0])} ({int(per_edge[bad[0]])} boundary faces)")

    @cached_property
    def boundary_labels(self) -> np.ndarray:
        """경계면마다 연결성분 번호 (경계 모서리 공유로 연결)"""
        bf = np.flatnonzero(self.boundary_faces)
        if bf.size == 0:
            return np.zeros(0, dtype=np.int64)
        fe = self.face_edges[bf]
        rows = np.repeat(np.arange(bf.size), 3)
        incidence = sp.csr_matrix((np.ones(rows.size), (rows, fe.ravel())),
                                  shape=(bf.size, self.edges.shape[0]))
        adjacency = incidence @ incidence.T
        _, labels = connected_components(adjacency, directed=False)
        return labels

    @property
    def boundary_components(self) -> int:
        labels = self.boundary_labels
        return int(labels.max()) + 1 if labels.size else 0

    # ─── Summaries ──────────────────────────────────────────────────────────

    @property
    def counts(self) -> Dict[str, int]:
        return {"V": self.n_vertices, "E": int(self.edges.shape[0]),
                "F": int(self.faces.shape[0]), "T": self.n_tets}

    @property
    def euler(self) -> int:
        c = self.counts
        return c["V"] - c["E"] + c["F"] - c["T"]

    def interior(self, kind: str) -> List[int]:
        """경계에 있지 않은 정점/모서리/면 번호 (kind: vertex|edge|face|tet)"""
        flags = {
            "vertex": self.boundary_vertices,
            "edge": self.boundary_edges,
            "face": self.boundary_faces,
            "tet": np.zeros(self.n_tets, dtype=bool),
        }
        if kind not in flags:
            raise MeshError(f"unknown entity kind {kind!r}")
        return np.flatnonzero(~flags[kind]).tolist()


# ─── Generation ─────────────────────────────────────────────────────────────

def _removed_cells(domain: str, n: int) -> set:
    m = n // 2
    if domain == "cavity":
        return {(m, m, m)}
    if domain == "hole":
        return {(m, m, l) for l in range(n)}
    return set()


def _validate(domain: str, n) -> None:
    if domain not in DOMAINS:
        raise MeshError(f"unknown domain {domain!r} (choose from {', '.join(DOMAINS)})")
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise MeshError(f"n must be an integer ≥ 1, got {n!r}")
    if domain == "cavity" and (n < 3 or n % 2 == 0):
        raise MeshError(f"cavity needs an odd n ≥ 3, got {n}")
    if domain == "hole" and n < 3:
        raise MeshError(f"hole needs n ≥ 3, got {n}")


def build_mesh(domain: str, n: int) -> TetMesh:
    """
    기준 영역의 Kuhn 분할 메쉬

    Args:
        domain: cube | cavity (가운데 셀 제거, n 홀수 ≥ 3) | hole (z 방향 관통 기둥 제거, n ≥ 3) | tet
        n: 한 변의 셀 수

    Returns:
        TetMesh (정점 번호 i + (n+1)(j + (n+1) l), 셀마다 6개 사면체)

    Raises:
        MeshError: 잘못된 영역이나 n
    """
    _validate(domain, n)
    n = int(n)
    if domain == "tet":
        vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        return TetMesh.from_arrays(vertices, [[0, 1, 2, 3]], domain="tet", n=n)

    side = n + 1
    grid = np.arange(side) / n
    zz, yy, xx = np.meshgrid(grid, grid, grid, indexing="ij")
    vertices = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)

    def index(p):
        return p[0] + side * (p[1] + side * p[2])

    removed = _removed_cells(domain, n)
    tets = []
    for l in range(n):
        for j in range(n):
            for i in range(n):
                if (i, j, l) in removed:
                    continue
                for perm in permutations(range(3)):
                    p = [i, j, l]
                    corners = [index(p)]
                    for axis in perm:
                        p[axis] += 1
                        corners.append(index(p))
                    tets.append(corners)
    return TetMesh.from_arrays(vertices, np.array(tets, dtype=np.int64), domain=domain, n=n)


# ─── JSON IO ────────────────────────────────────────────────────────────────

def mesh_to_document(mesh: TetMesh) -> Dict:
    return {
        "schema": SCHEMA,
        "domain": mesh.domain,
        "n": mesh.n,
        "vertices": mesh.vertices.tolist(),
        "tets": mesh.tets.tolist(),
    }


def save_mesh(mesh: TetMesh, path: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(mesh_to_document(mesh)))
        f.write("\n")


def load_mesh(path: str) -> TetMesh:
    """
    "tet-mesh/v1" 메쉬 읽기

    Raises:
        SchemaError: 파일이 없거나 스키마가 다름
        MeshError: 메쉬 자체가 잘못됨
    """
    if not os.path.exists(path):
        raise SchemaError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path} is not valid JSON: {e}")
    if not isinstance(document, dict) or document.get("schema") != SCHEMA:
        raise SchemaError(f"{path}: expected schema {SCHEMA!r}")
    try:
        vertices, tets = document["vertices"], document["tets"]
    except KeyError as e:
        raise SchemaError(f"{path}: missing field {e}")
    return TetMesh.from_arrays(vertices, tets, domain=str(document.get("domain", "")),
                               n=int(document.get("n", 0)))
