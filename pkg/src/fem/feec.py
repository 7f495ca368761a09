"""
최저차 유한요소 외미분 공간
P1 (정점), N0 (모서리), RT0 (면), P0 (셀) 과 정수 접속행렬 G, C, Dv,
요소별 불연속 P1 공간으로의 Whitney 임베딩, (혼합) 질량행렬, 경계 Green 공식 구적
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Tuple

import numpy as np
import scipy.sparse as sp

from src.core.errors import MeshError, StructureError
from src.fem.mesh import FACE_SIGNS, LOCAL_EDGES, LOCAL_FACES, TetMesh


def _incidence(rows, cols, vals, shape) -> np.ndarray:
    mat = sp.coo_matrix((np.asarray(vals, dtype=np.int64), (np.asarray(rows), np.asarray(cols))), shape=shape)
    return mat.toarray().astype(np.int64)


def _local_p1_mass(volume: float) -> np.ndarray:
    """사면체 위 P1 질량 |T|(1 + δ_ij)/20"""
    return volume * (np.ones((4, 4)) + np.eye(4)) / 20.0


@dataclass(frozen=True, eq=False)
class FeecSpaces:
    """
    메쉬 위 네 공간과 도함수/질량 행렬

    W 공간은 요소별 불연속 P1 (스칼라: 사면체당 4 꼭짓점 값, 벡터: 12 값).
    E0, E1, ER, E3 는 P1, N0, RT0, P0 기저함수의 꼭짓점 값 (정확한 임베딩).
    """
    mesh: TetMesh

    @property
    def dims(self) -> Dict[str, int]:
        return dict(self.mesh.counts)

    # ─── Incidences ─────────────────────────────────────────────────────────

    @cached_property
    def G(self) -> np.ndarray:
        """E×V, 모서리 (a,b) 에서 φ_b − φ_a"""
        e = self.mesh.edges
        n_e = e.shape[0]
        rows = np.concatenate([np.arange(n_e), np.arange(n_e)])
        cols = np.concatenate([e[:, 0], e[:, 1]])
        vals = np.concatenate([-np.ones(n_e), np.ones(n_e)])
        return _incidence(rows, cols, vals, (n_e, self.mesh.n_vertices))

    @cached_property
    def C(self) -> np.ndarray:
        """F×E, ∂(a,b,c) = (b,c) − (a,c) + (a,b)"""
        fe = self.mesh.face_edges
        n_f = fe.shape[0]
        rows = np.repeat(np.arange(n_f), 3)
        vals = np.tile([1, -1, 1], n_f)
        return _incidence(rows, fe.ravel(), vals, (n_f, self.mesh.edges.shape[0]))

    @cached_property
    def Dv(self) -> np.ndarray:
        """T×F, 정렬 순서 경계 부호 × 사면체 방향 (P0 자유도는 셀 적분)"""
        tf = self.mesh.tet_faces
        n_t = tf.shape[0]
        rows = np.repeat(np.arange(n_t), 4)
        vals = (np.asarray(FACE_SIGNS)[None, :] * self.mesh.orientation[:, None]).ravel()
        return _incidence(rows, tf.ravel(), vals, (n_t, self.mesh.faces.shape[0]))

    def exactness_residuals(self) -> Tuple[int, int]:
        """정수 ‖C·G‖_max, ‖Dv·C‖_max (항상 0)"""
        cg = self.C @ self.G
        dc = self.Dv @ self.C
        return (int(np.abs(cg).max()) if cg.size else 0,
                int(np.abs(dc).max()) if dc.size else 0)

    # ─── Element geometry ───────────────────────────────────────────────────

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """(T, 4, 3) 정렬 순서 꼭짓점의 ∇λ_i"""
        p = self.mesh.vertices[self.mesh.sorted_tets]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=-1)
        if np.any(np.abs(np.linalg.det(jac)) == 0.0):
            raise MeshError("degenerate tet (singular Jacobian)")
        inv = np.linalg.inv(jac)
        grads = np.empty((p.shape[0], 4, 3))
        grads[:, 1:, :] = inv
        grads[:, 0, :] = -inv.sum(axis=1)
        return grads

    # ─── Embeddings into broken P1 ──────────────────────────────────────────

    @property
    def scalar_dim(self) -> int:
        return 4 * self.mesh.n_tets

    @property
    def vector_dim(self) -> int:
        return 12 * self.mesh.n_tets

    @cached_property
    def E0(self) -> np.ndarray:
        """P1 → 불연속 P1 (꼭짓점 값 1)"""
        n_t = self.mesh.n_tets
        rows = np.arange(4 * n_t)
        cols = self.mesh.sorted_tets.ravel()
        return sp.coo_matrix((np.ones(rows.size), (rows, cols)),
                             shape=(4 * n_t, self.mesh.n_vertices)).toarray()

    @cached_property
    def E3(self) -> np.ndarray:
        """P0 (셀 적분 자유도) → 불연속 P1 (모든 꼭짓점 값 1/|T|)"""
        n_t = self.mesh.n_tets
        rows = np.arange(4 * n_t)
        cols = np.repeat(np.arange(n_t), 4)
        vals = np.repeat(1.0 / self.mesh.volumes, 4)
        return sp.coo_matrix((vals, (rows, cols)), shape=(4 * n_t, n_t)).toarray()

    @cached_property
    def E1(self) -> np.ndarray:
        """N0 → 불연속 벡터 P1: 모서리 (i,j) 는 꼭짓점 i 에서 ∇λ_j, j 에서 −∇λ_i"""
        grads = self.barycentric_gradients
        te = self.mesh.tet_edges
        rows, cols, vals = [], [], []
        base = 12 * np.arange(self.mesh.n_tets)
        for e, (i, j) in enumerate(LOCAL_EDGES):
            for corner, value in ((i, grads[:, j, :]), (j, -grads[:, i, :])):
                for c in range(3):
                    rows.append(base + 3 * corner + c)
                    cols.append(te[:, e])
                    vals.append(value[:, c])
        return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.vector_dim, self.mesh.edges.shape[0])).toarray()

    @cached_property
    def ER(self) -> np.ndarray:
        """RT0 → 불연속 벡터 P1: 면 (i,j,l) 은 i 에서 2∇λ_j×∇λ_l (순환)"""
        grads = self.barycentric_gradients
        tf = self.mesh.tet_faces
        rows, cols, vals = [], [], []
        base = 12 * np.arange(self.mesh.n_tets)
        for f, (i, j, l) in enumerate(LOCAL_FACES):
            for corner, (a, b) in ((i, (j, l)), (j, (l, i)), (l, (i, j))):
                value = 2.0 * np.cross(grads[:, a, :], grads[:, b, :])
                for c in range(3):
                    rows.append(base + 3 * corner + c)
                    cols.append(tf[:, f])
                    vals.append(value[:, c])
        return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.vector_dim, self.mesh.faces.shape[0])).toarray()

    # ─── Masses ─────────────────────────────────────────────────────────────

    @cached_property
    def M_scalar(self) -> np.ndarray:
        """불연속 P1 의 L² Gram (블록 대각)"""
        blocks = [_local_p1_mass(v) for v in self.mesh.volumes]
        return sp.block_diag(blocks, format="csr").toarray()

    @cached_property
    def M_vector(self) -> np.ndarray:
        """불연속 벡터 P1 의 L² Gram (성분별 P1 질량)"""
        blocks = [np.kron(_local_p1_mass(v), np.eye(3)) for v in self.mesh.volumes]
        return sp.block_diag(blocks, format="csr").toarray()

    @cached_property
    def M_P1(self) -> np.ndarray:
        return self.E0.T @ self.M_scalar @ self.E0

    @cached_property
    def M_N0(self) -> np.ndarray:
        return self.E1.T @ self.M_vector @ self.E1

    @cached_property
    def M_RT0(self) -> np.ndarray:
        return self.ER.T @ self.M_vector @ self.ER

    @cached_property
    def M_P0(self) -> np.ndarray:
        return self.E3.T @ self.M_scalar @ self.E3

    @cached_property
    def M_N0xRT0(self) -> np.ndarray:
        """∫ (모서리 기저)·(면 기저), E×F"""
        return self.E1.T @ self.M_vector @ self.ER

    @cached_property
    def M_P1xP0(self) -> np.ndarray:
        """∫ (정점 기저)(셀 기저), V×T"""
        return self.E0.T @ self.M_scalar @ self.E3


def build_feec(mesh: TetMesh) -> FeecSpaces:
    """
    메쉬 위 공간 조립

    Raises:
        MeshError: 부피 0 사면체
        StructureError: 접속행렬 정확성 위반 (C·G ≠ 0 또는 Dv·C ≠ 0)
    """
    feec = FeecSpaces(mesh)
    if np.any(mesh.volumes <= 0.0):
        raise MeshError("degenerate tet (zero volume)")
    cg, dc = feec.exactness_residuals()
    if cg or dc:
        raise StructureError(f"incidence identities fail: |C·G| = {cg}, |Dv·C| = {dc}")
    return feec


# ─── Green's formula quadrature ─────────────────────────────────────────────

@dataclass(frozen=True)
class BoundaryQuadrature:
    """경계면별 인접 사면체, 국소 꼭짓점 번호, 바깥 단위법선, 넓이"""
    faces: np.ndarray
    tets: np.ndarray
    corners: np.ndarray
    normals: np.ndarray
    areas: np.ndarray


def boundary_quadrature(mesh: TetMesh) -> BoundaryQuadrature:
    bf = np.flatnonzero(mesh.boundary_faces)
    owner = np.full(mesh.faces.shape[0], -1, dtype=np.int64)
    local = np.full(mesh.faces.shape[0], -1, dtype=np.int64)
    for f in range(len(LOCAL_FACES)):
        owner[mesh.tet_faces[:, f]] = np.arange(mesh.n_tets)
        local[mesh.tet_faces[:, f]] = f
    tets = owner[bf]
    corners = np.asarray(LOCAL_FACES)[local[bf]]
    st = mesh.sorted_tets[tets]
    p = mesh.vertices[st]
    idx = np.arange(bf.size)
    pa, pb, pc = p[idx, corners[:, 0]], p[idx, corners[:, 1]], p[idx, corners[:, 2]]
    opposite = 6 - corners.sum(axis=1)
    pd = p[idx, opposite]
    normal = np.cross(pb - pa, pc - pa)
    outward = np.where(np.einsum("ij,ij->i", normal, pd - pa) > 0, -1.0, 1.0)
    length = np.linalg.norm(normal, axis=1)
    return BoundaryQuadrature(bf, tets, corners, normal * (outward / length)[:, None], 0.5 * length)


def _corner_values(values: np.ndarray, tets: np.ndarray, corners: np.ndarray, width: int) -> np.ndarray:
    """(faces, 3, width) 경계면 세 꼭짓점에서의 불연속 값"""
    per_tet = values.reshape(-1, 4, width)
    return per_tet[tets[:, None], corners]


def _midpoints(vals: np.ndarray) -> np.ndarray:
    """(faces, 3, width) → 세 모서리 중점 값"""
    return 0.5 * (vals + vals[:, [1, 2, 0]])


def green_boundary_form(feec: FeecSpaces, k: int, x, y, quad: BoundaryQuadrature = None) -> float:
    """
    경계 적분 (모서리 중점 공식, 이차식까지 정확)

    k=0: ∫_Γ u (v·n), k=1: ∫_Γ (n×u)·w, k=2: ∫_Γ (u·n) v
    """
    quad = quad or boundary_quadrature(feec.mesh)
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if k == 0:
        p, q, wp, wq = feec.E0 @ x, feec.ER @ y, 1, 3
    elif k == 1:
        p, q, wp, wq = feec.E1 @ x, feec.E1 @ y, 3, 3
    elif k == 2:
        p, q, wp, wq = feec.ER @ x, feec.E0 @ y, 3, 1
    else:
        raise StructureError(f"Green's formula is defined for k = 0, 1, 2, got {k}")
    if quad.faces.size == 0:
        return 0.0
    pm = _midpoints(_corner_values(p, quad.tets, quad.corners, wp))
    qm = _midpoints(_corner_values(q, quad.tets, quad.corners, wq))
    n = quad.normals[:, None, :]
    if k == 0:
        integrand = pm[..., 0] * np.einsum("fmc,fmc->fm", qm, np.broadcast_to(n, qm.shape))
    elif k == 1:
        integrand = np.einsum("fmc,fmc->fm", np.cross(np.broadcast_to(n, pm.shape), pm), qm)
    else:
        integrand = np.einsum("fmc,fmc->fm", pm, np.broadcast_to(n, pm.shape)) * qm[..., 0]
    return float(np.sum(quad.areas * integrand.sum(axis=1) / 3.0))
