"""
복합체 쌍(complex pair) 데이터 모델
공간 W_k, 정의역 모델 D_k / Dt_k, 연산자 A_k / At_k, 트레이스 쌍선형형식 b_k 와 검증
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from src.core.checks import CheckRecord, all_passed, expect, gate, info
from src.core.config import Tolerances
from src.core.errors import NotInDomainError, StructureError
from src.core.linalg import (
    DEFAULT_TOLERANCES,
    InnerProductSpace,
    bilinear_norm,
    numerical_rank,
)


def _matrix(level: int, name: str, value, shape: Tuple[int, int]) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape != shape:
        raise StructureError(f"{name} has shape {arr.shape}, expected {shape}", level=level)
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def graph_gram(W: InnerProductSpace, W_op: InnerProductSpace, inj, op) -> np.ndarray:
    """그래프 Gram injᵀ·G_W·inj + opᵀ·G_op·op"""
    g = inj.T @ W.gram @ inj + op.T @ W_op.gram @ op
    return 0.5 * (g + g.T)


@dataclass(frozen=True, eq=False)
class ComplexLevel:
    """
    복합체 쌍의 한 단계

    inj_D: D → W_k, inj_Dt: Dt → W_{k+1}, A: D → W_{k+1}, At: Dt → W_k.
    lift_A (D_k → D_{k+1}), lift_At (Dt_k → Dt_{k-1}) 는 정확한 정수 사상이 있을 때만 둔다.
    """
    k: int
    W: InnerProductSpace
    W_next: InnerProductSpace
    D: InnerProductSpace
    Dt: InnerProductSpace
    inj_D: np.ndarray
    inj_Dt: np.ndarray
    A: np.ndarray
    At: np.ndarray
    lift_A: Optional[np.ndarray] = None
    lift_At: Optional[np.ndarray] = None

    def __post_init__(self):
        k = self.k
        nw, nw1, nd, ndt = self.W.dim, self.W_next.dim, self.D.dim, self.Dt.dim
        object.__setattr__(self, "inj_D", _matrix(k, "inj_D", self.inj_D, (nw, nd)))
        object.__setattr__(self, "inj_Dt", _matrix(k, "inj_Dt", self.inj_Dt, (nw1, ndt)))
        object.__setattr__(self, "A", _matrix(k, "A", self.A, (nw1, nd)))
        object.__setattr__(self, "At", _matrix(k, "At", self.At, (nw, ndt)))
        if self.lift_A is not None:
            lift = np.asarray(self.lift_A, dtype=float)
            if lift.ndim != 2 or lift.shape[1] != nd:
                raise StructureError(f"lift_A has shape {lift.shape}, expected (*, {nd})", level=k)
            object.__setattr__(self, "lift_A", _matrix(k, "lift_A", lift, lift.shape))
        if self.lift_At is not None:
            lift = np.asarray(self.lift_At, dtype=float)
            if lift.ndim != 2 or lift.shape[1] != ndt:
                raise StructureError(f"lift_At has shape {lift.shape}, expected (*, {ndt})", level=k)
            object.__setattr__(self, "lift_At", _matrix(k, "lift_At", lift, lift.shape))

    @classmethod
    def from_operators(cls, k: int, W: InnerProductSpace, W_next: InnerProductSpace,
                       inj_D, inj_Dt, A, At, lift_A=None, lift_At=None) -> "ComplexLevel":
        """그래프 Gram 을 계산해 단계 생성"""
        inj_D, inj_Dt = np.asarray(inj_D, float), np.asarray(inj_Dt, float)
        A, At = np.asarray(A, float), np.asarray(At, float)
        if inj_D.shape[0] != W.dim or A.shape[0] != W_next.dim:
            raise StructureError(
                f"inj_D/A rows ({inj_D.shape[0]}, {A.shape[0]}) do not match W dims ({W.dim}, {W_next.dim})",
                level=k)
        if inj_Dt.shape[0] != W_next.dim or At.shape[0] != W.dim:
            raise StructureError(
                f"inj_Dt/At rows ({inj_Dt.shape[0]}, {At.shape[0]}) do not match W dims", level=k)
        D = InnerProductSpace(graph_gram(W, W_next, inj_D, A), name=f"D{k}")
        Dt = InnerProductSpace(graph_gram(W_next, W, inj_Dt, At), name=f"Dt{k}")
        return cls(k, W, W_next, D, Dt, inj_D, inj_Dt, A, At, lift_A, lift_At)

    @cached_property
    def pairing(self) -> "PairingForm":
        return PairingForm.assemble(self)

    def graph_gram_residuals(self) -> Tuple[float, float]:
        """저장된 Gram 과 그래프 Gram 의 상대 차이 (D, Dt)"""
        def _rel(stored, rebuilt):
            scale = max(float(np.abs(rebuilt).max()) if rebuilt.size else 0.0, 1e-300)
            return float(np.abs(stored - rebuilt).max()) / scale if rebuilt.size else 0.0
        gd = graph_gram(self.W, self.W_next, self.inj_D, self.A)
        gdt = graph_gram(self.W_next, self.W, self.inj_Dt, self.At)
        return _rel(self.D.gram, gd), _rel(self.Dt.gram, gdt)


@dataclass(frozen=True, eq=False)
class PairingForm:
    """b_k(x,y) = (A x, y) − (x, At y) 의 행렬 B = Aᵀ G_{k+1} inj_Dt − inj_Dᵀ G_k At"""
    k: int
    matrix: np.ndarray

    @classmethod
    def assemble(cls, level: ComplexLevel) -> "PairingForm":
        b = level.A.T @ level.W_next.gram @ level.inj_Dt - level.inj_D.T @ level.W.gram @ level.At
        b.setflags(write=False)
        return cls(level.k, b)

    def __call__(self, x, y) -> float:
        return float(np.asarray(x) @ self.matrix @ np.asarray(y))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True, eq=False)
class ComplexPair:
    """연속된 단계들의 모음 (범위 밖 단계는 영공간)"""
    levels: Tuple[ComplexLevel, ...]
    label: str = ""
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        levels = tuple(sorted(self.levels, key=lambda lv: lv.k))
        object.__setattr__(self, "levels", levels)
        for prev, cur in zip(levels, levels[1:]):
            if cur.k != prev.k + 1:
                raise StructureError(f"levels are not contiguous ({prev.k} then {cur.k})", level=cur.k)
            if prev.W_next.dim != cur.W.dim or not np.array_equal(prev.W_next.gram, cur.W.gram):
                raise StructureError("W_next of the previous level differs from W", level=cur.k)
            if prev.lift_A is not None and prev.lift_A.shape[0] != cur.D.dim:
                raise StructureError(
                    f"lift_A has {prev.lift_A.shape[0]} rows, D{cur.k} has dim {cur.D.dim}", level=prev.k)
            if cur.lift_At is not None and cur.lift_At.shape[0] != prev.Dt.dim:
                raise StructureError(
                    f"lift_At has {cur.lift_At.shape[0]} rows, Dt{prev.k} has dim {prev.Dt.dim}", level=cur.k)

    @property
    def k_min(self) -> int:
        return self.levels[0].k if self.levels else 0

    @property
    def k_max(self) -> int:
        return self.levels[-1].k if self.levels else -1

    def indices(self) -> List[int]:
        return [lv.k for lv in self.levels]

    def level(self, k: int) -> Optional[ComplexLevel]:
        if not self.levels or k < self.k_min or k > self.k_max:
            return None
        return self.levels[k - self.k_min]

    def __getitem__(self, k: int) -> ComplexLevel:
        lv = self.level(k)
        if lv is None:
            raise KeyError(k)
        return lv

    @cached_property
    def _lift_cache(self) -> Dict:
        return {}

    def lift_matrix(self, k: int, tol: Optional[Tolerances] = None) -> np.ndarray:
        """A_k 의 D_{k+1} 좌표 표현 (D_{k+1}.dim × D_k.dim)"""
        key = ("A", k)
        if key not in self._lift_cache:
            coeffs, _ = range_lift(self, k, np.eye(self[k].D.dim), tol)
            self._lift_cache[key] = coeffs
        return self._lift_cache[key]

    def lift_dual_matrix(self, k: int, tol: Optional[Tolerances] = None) -> np.ndarray:
        """At_k 의 Dt_{k-1} 좌표 표현 (Dt_{k-1}.dim × Dt_k.dim)"""
        key = ("At", k)
        if key not in self._lift_cache:
            coeffs, _ = range_lift_dual(self, k, np.eye(self[k].Dt.dim), tol)
            self._lift_cache[key] = coeffs
        return self._lift_cache[key]


# ─── Range lifts ────────────────────────────────────────────────────────────

def _lift(target_inj: Optional[np.ndarray], image: np.ndarray,
          exact_lift: Optional[np.ndarray], x: np.ndarray, tol: Tolerances,
          level: int, what: str) -> Tuple[np.ndarray, float]:
    if image.size == 0 or x.size == 0:
        rows = image.shape[0] if target_inj is None else target_inj.shape[1]
        return np.zeros((rows,) + x.shape[1:]), 0.0
    if target_inj is None:
        # 범위 밖 연산자는 0 이므로 정의역은 W 전체
        coeffs = image
        approx = image
    elif exact_lift is not None:
        coeffs = exact_lift @ x
        approx = target_inj @ coeffs
    else:
        coeffs = sla.lstsq(target_inj, image)[0] if target_inj.shape[1] else np.zeros((0,) + x.shape[1:])
        approx = target_inj @ coeffs
    diff = np.linalg.norm(approx - image)
    scale = np.linalg.norm(image)
    residual = float(diff / scale) if scale > 0 else float(diff)
    if residual > tol.residual:
        raise NotInDomainError(f"{what} does not lift (residual {residual:.3e})", level=level)
    return coeffs, residual


def range_lift(pair: ComplexPair, k: int, x, tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, float]:
    """
    A_k x 를 D_{k+1} 좌표로 표현

    Args:
        pair: 복합체 쌍
        k: 단계
        x: D_k 좌표 벡터 (또는 열 모음)

    Returns:
        (계수 c, 상대 잔차), inj_{D_{k+1}} c = A_k x.
        k+1 단계가 없으면 c 는 W_{k+1} 좌표 그대로
    """
    tol = tol or DEFAULT_TOLERANCES
    lv = pair[k]
    x = np.asarray(x, dtype=float)
    image = lv.A @ x
    nxt = pair.level(k + 1)
    return _lift(None if nxt is None else nxt.inj_D, image, lv.lift_A, x, tol, k,
                 f"A_{k} x")


def range_lift_dual(pair: ComplexPair, k: int, y, tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, float]:
    """At_k y 를 Dt_{k-1} 좌표로 표현"""
    tol = tol or DEFAULT_TOLERANCES
    lv = pair[k]
    y = np.asarray(y, dtype=float)
    image = lv.At @ y
    prv = pair.level(k - 1)
    return _lift(None if prv is None else prv.inj_Dt, image, lv.lift_At, y, tol, k,
                 f"At_{k} y")


# ─── Validation ─────────────────────────────────────────────────────────────

@dataclass
class ValidationReport:
    """validate() 결과"""
    records: List[CheckRecord]
    seed: int
    samples: int

    @property
    def passed(self) -> bool:
        return all_passed(self.records)

    def failed(self) -> List[CheckRecord]:
        return [r for r in self.records if not r.passed]

    def payload(self) -> List[dict]:
        return [r.to_dict(with_timing=False) for r in sorted(self.records, key=CheckRecord.sort_key)]


def _relative(mat: np.ndarray, scale: float) -> float:
    if mat.size == 0:
        return 0.0
    num = float(np.abs(mat).max())
    return num / scale if scale > 0 else num


def complex_residual(pair: ComplexPair, k: int, tol: Optional[Tolerances] = None) -> float:
    """A_{k+1}∘A_k 의 상대 잔차 (정수 lift 가 있으면 정수 경로)"""
    lv, nxt = pair[k], pair.level(k + 1)
    if nxt is None or nxt.A.size == 0 or lv.D.dim == 0:
        return 0.0
    lift = pair.lift_matrix(k, tol)
    after = pair.level(k + 2)
    if nxt.lift_A is not None and after is not None:
        # inj·(L_{k+1} L_k) + (A_{k+1} − inj·L_{k+1}) L_k
        defect = nxt.A - after.inj_D @ nxt.lift_A
        product = after.inj_D @ (nxt.lift_A @ lift) + defect @ lift
    else:
        product = nxt.A @ lift
    scale = float(np.abs(nxt.A).max()) * max(float(np.abs(lift).max()), 1.0)
    return _relative(product, scale)


def dual_complex_residual(pair: ComplexPair, k: int, tol: Optional[Tolerances] = None) -> float:
    """At_{k-1}∘At_k 의 상대 잔차"""
    lv, prv = pair[k], pair.level(k - 1)
    if prv is None or prv.At.size == 0 or lv.Dt.dim == 0:
        return 0.0
    lift = pair.lift_dual_matrix(k, tol)
    before = pair.level(k - 2)
    if prv.lift_At is not None and before is not None:
        defect = prv.At - before.inj_Dt @ prv.lift_At
        product = before.inj_Dt @ (prv.lift_At @ lift) + defect @ lift
    else:
        product = prv.At @ lift
    scale = float(np.abs(prv.At).max()) * max(float(np.abs(lift).max()), 1.0)
    return _relative(product, scale)


def pairing_norm(level: ComplexLevel) -> float:
    """그래프 노름에서 b_k 의 정확한 노름 (≤ 1)"""
    if level.D.dim == 0 or level.Dt.dim == 0:
        return 0.0
    return bilinear_norm(level.D, level.Dt, level.pairing.matrix)


def sample_pairing_bound(level: ComplexLevel, samples: int, seed: int) -> Tuple[int, float]:
    """
    무작위 (x, y) 쌍에서 |b(x,y)| ≤ ‖x‖‖y‖ 위반 횟수와 최대 비율

    Returns:
        (위반 횟수, 최대 비율)
    """
    nd, ndt = level.D.dim, level.Dt.dim
    if nd == 0 or ndt == 0:
        return 0, 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((nd, samples))
    y = rng.standard_normal((ndt, samples))
    vals = np.abs(np.einsum("is,ij,js->s", x, level.pairing.matrix, y))
    nx = np.linalg.norm(level.D.factor @ x, axis=0)
    ny = np.linalg.norm(level.Dt.factor @ y, axis=0)
    ratio = vals / (nx * ny)
    return int(np.count_nonzero(ratio > 1.0 + 1e-12)), float(ratio.max())


def validate(pair: ComplexPair, tol: Optional[Tolerances] = None) -> ValidationReport:
    """
    복합체 쌍의 불변식 검사

    단계별: 그래프 Gram 잔차, 포함사상 계수, 치역 lift, 복합체 성질,
    쌍대 복합체 성질, 쌍선형형식 유계성(시드 고정 표본 + 정확한 노름)
    """
    tol = tol or DEFAULT_TOLERANCES
    records: List[CheckRecord] = []
    for lv in pair.levels:
        k = lv.k
        for space in (lv.W, lv.W_next, lv.D, lv.Dt):
            space.check_spd()

        rd, rdt = lv.graph_gram_residuals()
        records.append(gate("graph_gram.D", rd, tol.exact, k, "complex-pair"))
        records.append(gate("graph_gram.Dt", rdt, tol.exact, k, "complex-pair"))

        for name, inj in (("inclusion_rank.D", lv.inj_D), ("inclusion_rank.Dt", lv.inj_Dt)):
            rank = numerical_rank(inj, tol).rank if inj.size else 0
            records.append(expect(name, rank == inj.shape[1], k, "complex-pair",
                                  value=rank, columns=inj.shape[1]))

        try:
            _, res = range_lift(pair, k, np.eye(lv.D.dim), tol)
            records.append(gate("range_lift", res, tol.residual, k, "complex-pair"))
            records.append(gate("complex_property", complex_residual(pair, k, tol), tol.exact,
                                k, "complex-pair"))
        except NotInDomainError as e:
            records.append(expect("range_lift", False, k, "complex-pair", error=str(e)))

        try:
            _, res = range_lift_dual(pair, k, np.eye(lv.Dt.dim), tol)
            records.append(gate("range_lift_dual", res, tol.residual, k, "complex-pair"))
            records.append(gate("dual_complex_property", dual_complex_residual(pair, k, tol),
                                tol.exact, k, "complex-pair"))
        except NotInDomainError as e:
            records.append(expect("range_lift_dual", False, k, "complex-pair", error=str(e)))

        violations, worst = sample_pairing_bound(lv, tol.samples, tol.seed + k)
        records.append(expect("pairing_bound", violations == 0, k, "complex-pair",
                              value=violations, max_ratio=worst, seed=tol.seed + k,
                              samples=tol.samples))
        records.append(info("pairing_norm", pairing_norm(lv), k, "complex-pair"))

    return ValidationReport(records, tol.seed, tol.samples)
