"""
Gram 계량 선형대수 핵심 모듈
내적 공간, 부분공간, 몫공간, 쌍대 벡터, 허용오차 기반 계수/커널 계산
"""

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla

from src.core.config import Tolerances
from src.core.errors import ConfigurationError, RankInstabilityWarning, StructureError

DEFAULT_TOLERANCES = Tolerances()
EPS = np.finfo(float).eps


def _as_matrix(mat, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2:
        raise StructureError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


# ─── Rank & kernels ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RankInfo:
    """계수 판정 기록 (임계값, 특이값, 불안정 여부)"""
    rank: int
    tau: float
    sigma_max: float
    singular_values: Tuple[float, ...] = ()
    unstable: bool = False

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "tau": self.tau,
            "sigma_max": self.sigma_max,
            "unstable": self.unstable,
        }


def _decide_rank(s: np.ndarray, shape: Tuple[int, int], tol: Tolerances) -> RankInfo:
    m, n = shape
    if s.size == 0 or s[0] == 0.0:
        return RankInfo(rank=0, tau=0.0, sigma_max=0.0, singular_values=tuple(s.tolist()))
    smax = float(s[0])
    tau = max(m, n) * EPS * smax * tol.rank_factor
    lo, hi = tau / tol.band, tau * tol.band
    in_band = (s >= lo) & (s <= hi)
    # 불안정 구간의 특이값은 0이 아닌 것으로 센다 (커널을 키우지 않음)
    rank = int(np.count_nonzero(s >= lo))
    unstable = bool(in_band.any())
    if unstable:
        warnings.warn(
            f"{int(in_band.sum())} singular value(s) within [{lo:.3e}, {hi:.3e}] of the rank threshold",
            RankInstabilityWarning,
            stacklevel=3,
        )
    return RankInfo(rank=rank, tau=tau, sigma_max=smax,
                    singular_values=tuple(s.tolist()), unstable=unstable)


def numerical_rank(mat, tol: Optional[Tolerances] = None) -> RankInfo:
    """
    τ = max(m,n)·eps·σ_max·rank_factor 기준의 수치 계수

    실제 절단값은 τ/band 다: σ ≥ τ/band 인 특이값을 모두 0 이 아닌 것으로 센다.
    [τ/band, τ·band] 안의 특이값은 RankInstabilityWarning 과 RankInfo.unstable 로 알린다.
    """
    tol = tol or DEFAULT_TOLERANCES
    mat = _as_matrix(mat)
    if mat.size == 0:
        return RankInfo(rank=0, tau=0.0, sigma_max=0.0)
    s = sla.svdvals(mat)
    return _decide_rank(s, mat.shape, tol)


def svd_kernels(mat, tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, np.ndarray, RankInfo]:
    """
    한 번의 SVD로 왼쪽/오른쪽 커널과 치역 기저를 함께 계산

    Returns:
        (왼쪽 커널 기저 m×(m-r), 오른쪽 커널 기저 n×(n-r), RankInfo)
    """
    tol = tol or DEFAULT_TOLERANCES
    mat = _as_matrix(mat)
    m, n = mat.shape
    if mat.size == 0:
        return np.eye(m), np.eye(n), RankInfo(rank=0, tau=0.0, sigma_max=0.0)
    u, s, vt = sla.svd(mat, full_matrices=True)
    info = _decide_rank(s, mat.shape, tol)
    r = info.rank
    return u[:, r:], vt[r:].T, info


def range_basis(mat, tol: Optional[Tolerances] = None) -> np.ndarray:
    """열공간의 유클리드 정규직교 기저"""
    tol = tol or DEFAULT_TOLERANCES
    mat = _as_matrix(mat)
    m, n = mat.shape
    if mat.size == 0:
        return np.zeros((m, 0))
    u, s, _ = sla.svd(mat, full_matrices=False)
    info = _decide_rank(s, mat.shape, tol)
    return u[:, :info.rank]


def subspace_residuals(first, second) -> Tuple[float, float]:
    """
    두 열공간 사이의 상호 사영 잔차

    Args:
        first, second: 유클리드 정규직교 기저 (같은 행 수)

    Returns:
        (first 가 second 밖으로 벗어난 정도, second 가 first 밖으로 벗어난 정도)
    """
    a = _as_matrix(first)
    b = _as_matrix(second)
    if a.shape[0] != b.shape[0]:
        raise StructureError(f"ambient dimensions differ: {a.shape[0]} vs {b.shape[0]}")

    def _escape(x, y):
        if x.shape[1] == 0:
            return 0.0
        rest = x - y @ (y.T @ x) if y.shape[1] else x
        return float(np.linalg.norm(rest, 2))

    return _escape(a, b), _escape(b, a)


# ─── Spaces ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class InnerProductSpace:
    """SPD Gram 행렬이 내적을 정의하는 유한차원 공간"""
    gram: np.ndarray
    name: str = ""
    symmetry_tol: float = DEFAULT_TOLERANCES.spd_symmetry

    def __post_init__(self):
        g = _as_matrix(self.gram, f"gram of {self.name or 'space'}")
        if g.shape[0] != g.shape[1]:
            raise StructureError(f"gram of {self.name or 'space'} is not square: {g.shape}")
        if g.size:
            scale = float(np.abs(g).max())
            asym = float(np.abs(g - g.T).max())
            if asym > self.symmetry_tol * max(scale, 1e-300):
                raise ConfigurationError(
                    f"gram of {self.name or 'space'} is not symmetric (defect {asym:.3e})")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)

    @classmethod
    def euclidean(cls, n: int, name: str = "") -> "InnerProductSpace":
        return cls(np.eye(n), name=name or f"R^{n}")

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @cached_property
    def factor(self) -> np.ndarray:
        """상삼각 Cholesky 인자 R (gram = RᵀR)"""
        if self.dim == 0:
            return np.zeros((0, 0))
        try:
            return sla.cholesky(self.gram, lower=False)
        except sla.LinAlgError as e:
            raise ConfigurationError(f"gram of {self.name or 'space'} is not positive definite: {e}")

    def check_spd(self) -> None:
        _ = self.factor

    def solve(self, rhs) -> np.ndarray:
        """gram⁻¹·rhs (역행렬을 만들지 않음)"""
        rhs = np.asarray(rhs, dtype=float)
        if self.dim == 0:
            return np.zeros_like(rhs)
        return sla.cho_solve((self.factor, False), rhs)

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ self.gram @ np.asarray(y))

    def norm(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.dim == 0:
            return 0.0
        return float(np.linalg.norm(self.factor @ x))

    def whiten(self, mat) -> np.ndarray:
        """R·mat : Gram 노름을 유클리드 노름으로 바꾸는 좌표"""
        return self.factor @ np.asarray(mat, dtype=float)

    def unwhiten(self, mat) -> np.ndarray:
        """R⁻¹·mat"""
        mat = np.asarray(mat, dtype=float)
        if self.dim == 0:
            return mat
        return sla.solve_triangular(self.factor, mat, lower=False)


@dataclass(frozen=True, eq=False)
class DualVector:
    """predual 공간 기저에 대한 계수 φ(e_i) 로 표현한 범함수"""
    space: InnerProductSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != self.space.dim:
            raise StructureError(
                f"functional has {c.shape[0]} coefficients, space has dim {self.space.dim}")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x) -> float:
        return float(self.coeffs @ np.asarray(x, dtype=float))

    def norm(self) -> float:
        return dual_norm(self.space, self)


@dataclass(frozen=True, eq=False)
class Subspace:
    """부모 공간 좌표로 쓴 기저 열을 가진 부분공간"""
    parent: InnerProductSpace
    basis: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1) if b.size else np.zeros((self.parent.dim, 0))
        if b.size == 0:
            b = np.zeros((self.parent.dim, b.shape[1]))
        if b.shape[0] != self.parent.dim:
            raise StructureError(
                f"basis has {b.shape[0]} rows, parent {self.parent.name or 'space'} has dim {self.parent.dim}")
        if b.shape[1] > 0:
            info = numerical_rank(b, self.tol)
            if info.rank < b.shape[1]:
                raise StructureError(
                    f"basis of rank {info.rank} has {b.shape[1]} columns (not injective)")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def full(cls, parent: InnerProductSpace) -> "Subspace":
        return cls(parent, np.eye(parent.dim))

    @classmethod
    def zero(cls, parent: InnerProductSpace) -> "Subspace":
        return cls(parent, np.zeros((parent.dim, 0)))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @cached_property
    def gram(self) -> np.ndarray:
        """유도 Gram basisᵀ·G·basis"""
        return self.basis.T @ self.parent.gram @ self.basis

    @cached_property
    def space(self) -> InnerProductSpace:
        return InnerProductSpace(0.5 * (self.gram + self.gram.T), name=f"sub({self.parent.name})")

    def coords(self, x) -> np.ndarray:
        """Gram 직교 사영의 기저 좌표"""
        x = np.asarray(x, dtype=float)
        if self.dim == 0:
            return np.zeros((0,) + x.shape[1:])
        return self.space.solve(self.basis.T @ (self.parent.gram @ x))

    def project(self, x) -> np.ndarray:
        return self.basis @ self.coords(x)

    def residual(self, x) -> float:
        """‖x − Px‖ / ‖x‖ (Gram 노름, x=0 이면 0)"""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            nx = self.parent.norm(x)
            return 0.0 if nx == 0.0 else self.parent.norm(x - self.project(x)) / nx
        return max((self.residual(col) for col in x.T), default=0.0)

    def contains(self, x, rtol: Optional[float] = None) -> bool:
        rtol = self.tol.residual if rtol is None else rtol
        return self.residual(x) <= rtol

    def orthonormal(self) -> np.ndarray:
        """유클리드 정규직교 기저 (상호 사영 비교용)"""
        if self.dim == 0:
            return np.zeros((self.parent.dim, 0))
        q, _ = np.linalg.qr(self.basis)
        return q

    def complement(self) -> "Subspace":
        """Gram 직교여공간"""
        n = self.parent.dim
        if self.dim == 0:
            return Subspace.full(self.parent)
        if self.dim == n:
            return Subspace.zero(self.parent)
        constraint = self.basis.T @ self.parent.gram
        basis = sla.null_space(constraint)
        basis = basis[:, : n - self.dim]
        return Subspace(self.parent, basis, self.tol)

    def intersect(self, other: "Subspace") -> "Subspace":
        """여공간 사영을 쌓은 행렬의 커널로 교집합 계산"""
        if other.parent.dim != self.parent.dim:
            raise StructureError("subspaces live in different parents")
        n = self.parent.dim
        qa, qb = self.orthonormal(), other.orthonormal()
        stacked = np.vstack([np.eye(n) - qa @ qa.T, np.eye(n) - qb @ qb.T])
        _, right, _ = svd_kernels(stacked, self.tol)
        return Subspace(self.parent, right, self.tol)


@dataclass(frozen=True, eq=False)
class QuotientSpace:
    """parent / kernel, Gram 직교여공간을 대표 단면으로 사용"""
    parent: InnerProductSpace
    kernel: Subspace
    complement_basis: np.ndarray
    quotient_gram: np.ndarray

    @classmethod
    def of(cls, kernel: Subspace) -> "QuotientSpace":
        comp = kernel.complement()
        return cls(kernel.parent, kernel, comp.basis, comp.gram)

    @property
    def dim(self) -> int:
        return self.complement_basis.shape[1]

    @cached_property
    def space(self) -> InnerProductSpace:
        g = 0.5 * (self.quotient_gram + self.quotient_gram.T)
        return InnerProductSpace(g, name=f"{self.parent.name}/ker")

    @cached_property
    def projector(self) -> np.ndarray:
        """여공간으로의 Gram 직교 사영 (= I − P_kernel)"""
        return orthogonal_projector(self.parent, Subspace(self.parent, self.complement_basis))

    def coords(self, x) -> np.ndarray:
        """[x] 의 좌표 = Px 의 여공간 기저 좌표"""
        x = np.asarray(x, dtype=float)
        if self.dim == 0:
            return np.zeros((0,) + x.shape[1:])
        return self.space.solve(self.complement_basis.T @ (self.parent.gram @ x))

    def lift(self, xi) -> np.ndarray:
        """최소 노름 대표원"""
        return self.complement_basis @ np.asarray(xi, dtype=float)

    def norm(self, x) -> float:
        """몫 노름 ‖[x]‖ = ‖Px‖"""
        if self.dim == 0:
            return 0.0
        return self.space.norm(self.coords(x))

    def orthogonality_residual(self) -> float:
        """여공간 기저와 커널 기저의 Gram 직교성 잔차 (상대값)"""
        if self.dim == 0 or self.kernel.dim == 0:
            return 0.0
        cross = self.complement_basis.T @ self.parent.gram @ self.kernel.basis
        scale = np.linalg.norm(self.parent.gram, 2) * np.linalg.norm(self.complement_basis, 2) \
            * np.linalg.norm(self.kernel.basis, 2)
        return float(np.abs(cross).max() / scale)


@dataclass(frozen=True, eq=False)
class Annihilator:
    """{φ : φ(s) = 0 ∀ s ∈ sub} 의 기저와 소속 판정"""
    sub: Subspace
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def residual(self, coeffs) -> float:
        c = np.asarray(coeffs, dtype=float)
        nc = np.linalg.norm(c)
        if nc == 0.0 or self.sub.dim == 0:
            return 0.0
        return float(np.linalg.norm(self.sub.orthonormal().T @ c) / nc)

    def contains(self, coeffs, rtol: float = DEFAULT_TOLERANCES.residual) -> bool:
        return self.residual(coeffs) <= rtol


# ─── Operations ─────────────────────────────────────────────────────────────

def orthogonal_projector(parent: InnerProductSpace, sub: Subspace) -> np.ndarray:
    """
    Gram 직교 사영 행렬 P = B (BᵀGB)⁻¹ BᵀG

    Args:
        parent: 내적 공간
        sub: parent 의 부분공간

    Returns:
        dim×dim 행렬 (P² = P, G·P 대칭)
    """
    if sub.parent is not parent:
        if sub.parent.dim != parent.dim or not np.array_equal(sub.parent.gram, parent.gram):
            raise StructureError(
                f"subspace parent (dim {sub.parent.dim}) differs from given parent (dim {parent.dim})")
    parent.check_spd()
    n = parent.dim
    if sub.dim == 0:
        return np.zeros((n, n))
    b = sub.basis
    return b @ sub.space.solve(b.T @ parent.gram)


def kernel_of(mat, tol: Optional[Tolerances] = None,
              parent: Optional[InnerProductSpace] = None) -> Subspace:
    """
    {x : ‖mat·x‖ ≤ τ‖x‖} 의 기저

    Args:
        mat: m×n 행렬
        tol: 허용오차 설정
        parent: 결과 부분공간의 부모 (기본은 n차원 유클리드 공간)
    """
    tol = tol or DEFAULT_TOLERANCES
    mat = _as_matrix(mat)
    n = mat.shape[1]
    parent = parent or InnerProductSpace.euclidean(n)
    if parent.dim != n:
        raise StructureError(f"parent has dim {parent.dim}, matrix has {n} columns")
    _, right, _ = svd_kernels(mat, tol)
    return Subspace(parent, right, tol)


def annihilator(sub: Subspace) -> Annihilator:
    """부분공간의 소멸자 (parent' 안의 기저)"""
    n = sub.parent.dim
    if sub.dim == 0:
        return Annihilator(sub, np.eye(n))
    if sub.dim == n:
        return Annihilator(sub, np.zeros((n, 0)))
    basis = sla.null_space(sub.basis.T)[:, : n - sub.dim]
    return Annihilator(sub, basis)


def _coeffs_of(space: InnerProductSpace, phi: Union[DualVector, np.ndarray]) -> np.ndarray:
    if isinstance(phi, DualVector):
        if phi.space is not space and phi.space.dim != space.dim:
            raise StructureError("functional belongs to a different space")
        return phi.coeffs
    c = np.asarray(phi, dtype=float)
    if c.shape[0] != space.dim:
        raise StructureError(f"functional has {c.shape[0]} coefficients, space has dim {space.dim}")
    return c


def riesz_representative(space: InnerProductSpace, phi) -> np.ndarray:
    """gram⁻¹·coeffs"""
    return space.solve(_coeffs_of(space, phi))


def dual_norm(space: InnerProductSpace, phi) -> float:
    """sup |φ(x)|/‖x‖ = sqrt(cᵀ G⁻¹ c)"""
    c = _coeffs_of(space, phi)
    if space.dim == 0:
        return 0.0
    z = sla.solve_triangular(space.factor, c, trans='T', lower=False)
    return float(np.linalg.norm(z))


def bilinear_norm(left: InnerProductSpace, right: InnerProductSpace, mat) -> float:
    """b(x,y) = xᵀ M y 의 노름 sup |b|/(‖x‖‖y‖)"""
    mat = _as_matrix(mat)
    if mat.size == 0:
        return 0.0
    a = sla.solve_triangular(left.factor, mat, trans='T', lower=False)
    a = sla.solve_triangular(right.factor, a.T, trans='T', lower=False).T
    return float(sla.svdvals(a)[0])


def operator_singular_values(source: InnerProductSpace, target: InnerProductSpace, mat) -> np.ndarray:
    """Gram 노름 사이의 선형사상 mat 의 특이값 (내림차순)"""
    mat = _as_matrix(mat)
    if mat.size == 0:
        return np.zeros(0)
    whitened = target.whiten(mat)
    whitened = sla.solve_triangular(source.factor, whitened.T, trans='T', lower=False).T
    return sla.svdvals(whitened)


def operator_norm(source: InnerProductSpace, target: InnerProductSpace, mat) -> float:
    s = operator_singular_values(source, target, mat)
    return float(s[0]) if s.size else 0.0
