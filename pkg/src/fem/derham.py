"""
de Rham 복합체 쌍 조립
FEEC 공간으로부터 ComplexPair 를 만들고, 경계 삼각분할 복합체와 Smith 표준형 Betti 수를 계산
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_form

from src.core.complex_pair import ComplexLevel, ComplexPair
from src.core.errors import MeshError
from src.core.linalg import InnerProductSpace
from src.fem.feec import FeecSpaces, build_feec
from src.fem.mesh import TetMesh, build_mesh

GENERATOR = "derham-fem"


def interior_dofs(mesh: TetMesh) -> Dict[str, Dict[str, List[int]]]:
    """
    단계별 내부 자유도 번호 (경계조건 부분공간의 좌표 기저)

    k=0: D=P1 (정점), Dt=RT0 (면) / k=1: N0, N0 (모서리) / k=2: RT0 (면), P1 (정점) / k=3: P0 (셀)
    """
    vertex, edge, face, tet = (mesh.interior(kind) for kind in ("vertex", "edge", "face", "tet"))
    return {
        "0": {"D": vertex, "Dt": face},
        "1": {"D": edge, "Dt": edge},
        "2": {"D": face, "Dt": vertex},
        "3": {"D": tet, "Dt": []},
    }


def build_complex_pair(feec: FeecSpaces, label: str = "") -> ComplexPair:
    """
    최저차 de Rham 복합체 쌍

    W_0 = W_3 = 불연속 P1, W_1 = W_2 = 불연속 벡터 P1 (질량 Gram).
    A_k = inj_D(k+1)·lift_A 로 정확히 만든다 (lift_A = G, C, Dv).
    At_0 = −div, At_1 = curl, At_2 = −grad 이므로 lift_At = C (k=1), −G (k=2).
    """
    mesh = feec.mesh
    n_t = mesh.n_tets
    G, C, Dv = (m.astype(float) for m in (feec.G, feec.C, feec.Dv))
    E0, E1, ER, E3 = feec.E0, feec.E1, feec.ER, feec.E3

    W0 = InnerProductSpace(feec.M_scalar, name="W0")
    W1 = InnerProductSpace(feec.M_vector, name="W1")
    W2 = InnerProductSpace(feec.M_vector, name="W2")
    W3 = InnerProductSpace(feec.M_scalar, name="W3")
    W4 = InnerProductSpace(np.zeros((0, 0)), name="W4")

    levels = [
        ComplexLevel.from_operators(0, W0, W1, inj_D=E0, inj_Dt=ER, A=E1 @ G, At=-(E3 @ Dv),
                                    lift_A=G),
        ComplexLevel.from_operators(1, W1, W2, inj_D=E1, inj_Dt=E1, A=ER @ C, At=ER @ C,
                                    lift_A=C, lift_At=C),
        ComplexLevel.from_operators(2, W2, W3, inj_D=ER, inj_Dt=E0, A=E3 @ Dv, At=-(E1 @ G),
                                    lift_A=Dv, lift_At=-G),
        ComplexLevel.from_operators(3, W3, W4, inj_D=E3, inj_Dt=np.zeros((0, 0)), A=np.zeros((0, n_t)),
                                    At=np.zeros((4 * n_t, 0))),
    ]
    meta = {
        "generator": GENERATOR,
        "domain": mesh.domain,
        "n": int(mesh.n),
        "counts": mesh.counts,
        "euler": int(mesh.euler),
        "boundary_components": int(mesh.boundary_components),
        "interior": interior_dofs(mesh),
    }
    return ComplexPair(tuple(levels), label=label or f"derham:{mesh.domain}:n={mesh.n}", meta=meta)


def build_instance(domain: str, n: int) -> ComplexPair:
    """build_mesh → build_feec → build_complex_pair"""
    return build_complex_pair(build_feec(build_mesh(domain, n)))


# ─── Boundary surface complex ───────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class BoundaryComplex:
    """경계 삼각분할의 정점/모서리/삼각형과 정수 접속행렬 d0 (E_b×V_b), d1 (F_b×E_b)"""
    vertices: np.ndarray
    edges: np.ndarray
    faces: np.ndarray
    d0: np.ndarray
    d1: np.ndarray

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.vertices.size, self.edges.size, self.faces.size

    def exactness_residual(self) -> int:
        prod = self.d1 @ self.d0
        return int(np.abs(prod).max()) if prod.size else 0


def boundary_complex(mesh: TetMesh) -> BoundaryComplex:
    """
    경계 곡면 복합체

    Raises:
        MeshError: 닫힌 다양체 곡면이 아님
    """
    mesh.check_manifold()
    feec = FeecSpaces(mesh)
    bv = np.flatnonzero(mesh.boundary_vertices)
    be = np.flatnonzero(mesh.boundary_edges)
    bf = np.flatnonzero(mesh.boundary_faces)
    if bf.size == 0:
        raise MeshError("mesh has no boundary surface")
    d0 = feec.G[np.ix_(be, bv)]
    d1 = feec.C[np.ix_(bf, be)]
    return BoundaryComplex(bv, be, bf, d0, d1)


@dataclass(frozen=True)
class SmithBetti:
    betti: Tuple[int, ...]
    ranks: Tuple[int, ...]
    torsion: Tuple[int, ...]


def _smith_rank(mat: np.ndarray) -> Tuple[int, List[int]]:
    """정수 Smith 표준형의 0 아닌 대각 원소 수와 1 보다 큰 불변인자"""
    if mat.size == 0:
        return 0, []
    snf = smith_normal_form(Matrix(mat.astype(int).tolist()), domain=ZZ)
    diag = [abs(int(snf[i, i])) for i in range(min(snf.shape))]
    nonzero = [d for d in diag if d != 0]
    return len(nonzero), [d for d in nonzero if d > 1]


def smith_betti(bc: BoundaryComplex) -> SmithBetti:
    """정수 Smith 표준형으로 경계 곡면의 Betti 수 (b0, b1, b2)"""
    nv, ne, nf = bc.dims
    r0, t0 = _smith_rank(bc.d0)
    r1, t1 = _smith_rank(bc.d1)
    betti = (nv - r0, ne - r0 - r1, nf - r1)
    return SmithBetti(betti, (r0, r1), tuple(t0 + t1))
