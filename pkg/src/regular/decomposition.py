"""
정칙 분해 모듈
정칙 부분공간 W⁺ 위의 lifting/potential 분해, 확장 표면 연산자, 교집합 공간 W̊,
몫공간 T^{±}, Ŝ/D̂ 연산자, 치역 특성화 검사

한 단계의 분해는 "측(side)" 하나로 기술한다:
  primal (단계 k): X = Dt_k, Y = Dt_{k+1}, op = Aᵀ_{k+1},   ker_X = ker_dual(k),    치역 R(T^t_k)
  dual   (단계 k): X = D_{k+1}, Y = D_k,  op = A_k,         ker_X = ker_primal(k+1), 치역 R(T^n_{k+1})
분해식은 x = basis_a·L x + op·basis_b·V x.
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from src.core.checks import CheckRecord, expect, gate, info
from src.core.complex_pair import ComplexPair
from src.core.config import Tolerances
from src.core.errors import NoDecompositionError, SpanningFailure, StructureError
from src.core.linalg import (
    DEFAULT_TOLERANCES,
    InnerProductSpace,
    QuotientSpace,
    Subspace,
    numerical_rank,
    operator_norm,
    operator_singular_values,
    range_basis,
    subspace_residuals,
    svd_kernels,
)
from src.traces.trace_system import PRIMAL as TRACE_PRIMAL, TraceSystem, min_norm_extension

PRIMAL = "primal"
DUAL = "dual"
TOPIC = "regular"


@dataclass(frozen=True, eq=False)
class SideData:
    """분해가 일어나는 공간 X, 퍼텐셜 공간 Y, 연산자 op : Y → X"""
    side: str
    k: int
    X: InnerProductSpace
    Y: InnerProductSpace
    op: np.ndarray
    trace_level: int


def side_data(pair: ComplexPair, side: str, k: int, tol: Optional[Tolerances] = None) -> SideData:
    tol = tol or DEFAULT_TOLERANCES
    if side == PRIMAL:
        X = pair[k].Dt
        nxt = pair.level(k + 1)
        if nxt is None:
            Y = InnerProductSpace(np.zeros((0, 0)), name=f"Dt{k + 1}")
            op = np.zeros((X.dim, 0))
        else:
            Y = nxt.Dt
            op = pair.lift_dual_matrix(k + 1, tol)
        return SideData(side, k, X, Y, op, trace_level=k)
    if side == DUAL:
        if pair.level(k + 1) is None:
            raise StructureError(f"dual decomposition needs level {k + 1}", level=k)
        return SideData(side, k, pair[k + 1].D, pair[k].D, pair.lift_matrix(k, tol), trace_level=k + 1)
    raise StructureError(f"side must be 'primal' or 'dual', got {side!r}", level=k)


@dataclass(frozen=True, eq=False)
class RegularDecomposition:
    """
    정칙 분해 x = basis_a·L x + op·basis_b·V x

    Wp_a ⊆ X, Wp_b ⊆ Y (각각 유도 그래프 Gram), L : X → Wp_a 좌표, V : X → Wp_b 좌표
    """
    data: SideData
    Wp_a: Subspace
    Wp_b: Subspace
    L: np.ndarray
    V: np.ndarray
    residual: float
    range_residual: float
    lift_norm: float
    potential_norm: float

    @property
    def side(self) -> str:
        return self.data.side

    @property
    def k(self) -> int:
        return self.data.k

    @property
    def lifting(self) -> np.ndarray:
        """X → X, y ↦ basis_a L y"""
        return self.Wp_a.basis @ self.L

    @property
    def potential(self) -> np.ndarray:
        """X → Y, y ↦ basis_b V y"""
        return self.Wp_b.basis @ self.V


def build_regular(pair: ComplexPair, k: int, basis_a, basis_b, side: str = PRIMAL,
                  tol: Optional[Tolerances] = None) -> RegularDecomposition:
    """
    최소 노름 정칙 분해

    Args:
        pair: 복합체 쌍
        k: 단계
        basis_a: X 좌표로 쓴 W⁺ 기저 (lifting 공간)
        basis_b: Y 좌표로 쓴 W⁺ 기저 (potential 공간)
        side: "primal" 또는 "dual"

    Raises:
        NoDecompositionError: Wp_a + op·Wp_b 가 X 를 덮지 못함
    """
    tol = tol or DEFAULT_TOLERANCES
    data = side_data(pair, side, k, tol)
    Wp_a = Subspace(data.X, basis_a, tol)
    Wp_b = Subspace(data.Y, basis_b, tol)
    a, b, n = Wp_a.dim, Wp_b.dim, data.X.dim

    if n == 0:
        empty_a, empty_b = np.zeros((a, 0)), np.zeros((b, 0))
        return RegularDecomposition(data, Wp_a, Wp_b, empty_a, empty_b, 0.0, 0.0, 0.0, 0.0)

    M = np.hstack([Wp_a.basis, data.op @ Wp_b.basis])
    rank = numerical_rank(M, tol).rank if M.size else 0
    if rank < n:
        raise NoDecompositionError(
            f"{side} regular subspaces cover rank {rank} of a {n}-dimensional space", level=k)

    # [L; V] = R⁻¹ pinv(M R⁻¹), R = chol(diag(Ga, Gb))
    gram = sla.block_diag(Wp_a.gram, Wp_b.gram) if a + b else np.zeros((0, 0))
    R = sla.cholesky(0.5 * (gram + gram.T), lower=False)
    MR = sla.solve_triangular(R, M.T, trans='T', lower=False).T
    LV = sla.solve_triangular(R, sla.pinv(MR), lower=False)
    L, V = LV[:a], LV[a:]

    defect = M @ LV - np.eye(n)
    residual = float(np.linalg.norm(defect, 2))
    range_residual = max(Wp_a.residual(Wp_a.basis @ L) if a else 0.0,
                         Wp_b.residual(Wp_b.basis @ V) if b and V.size else 0.0)
    lift_norm = operator_norm(data.X, Wp_a.space, L) if a else 0.0
    potential_norm = operator_norm(data.X, Wp_b.space, V) if b else 0.0
    return RegularDecomposition(data, Wp_a, Wp_b, L, V, residual, range_residual, lift_norm, potential_norm)


def full_bases(pair: ComplexPair, side: str, k: int,
               tol: Optional[Tolerances] = None) -> Tuple[np.ndarray, np.ndarray]:
    """W⁺ = 전체 공간의 기저 쌍"""
    data = side_data(pair, side, k, tol)
    return np.eye(data.X.dim), np.eye(data.Y.dim)


def regular_levels(pair: ComplexPair) -> List[Tuple[str, int]]:
    """분해가 정의되는 (side, k) 목록"""
    ks = pair.indices()
    return [(PRIMAL, k) for k in ks] + [(DUAL, k) for k in ks[:-1]]


def full_regular_bases(pair: ComplexPair, tol: Optional[Tolerances] = None) -> Dict:
    return {(side, k): full_bases(pair, side, k, tol) for side, k in regular_levels(pair)}


def decomposition_records(reg: RegularDecomposition, tol: Optional[Tolerances] = None) -> List[CheckRecord]:
    tol = tol or DEFAULT_TOLERANCES
    name = f"regular.{reg.side}"
    return [
        gate(f"{name}.decomposition", reg.residual, tol.residual, reg.k, TOPIC),
        gate(f"{name}.ranges", reg.range_residual, tol.residual, reg.k, TOPIC),
        info(f"{name}.stability", max(reg.lift_norm, reg.potential_norm), reg.k, TOPIC,
             lift=reg.lift_norm, potential=reg.potential_norm),
    ]


# ─── Extended surface operators ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ExtendedSurfaceOp:
    """
    W⁻ = (Wp_a)' 에서 W⁺(op)' 로의 확장 표면 연산자

    W⁺(op) = {z ∈ Wp_b : op z ∈ Wp_a}, 좌표 Z (Wp_b 좌표), Aplus = op 의 Wp_a 좌표 표현
    """
    Z: np.ndarray
    Aplus: np.ndarray
    space: InnerProductSpace
    matrix: np.ndarray
    consistency: float
    continuity: float


def _w_plus_domain(reg: RegularDecomposition, tol: Tolerances) -> Tuple[np.ndarray, np.ndarray]:
    a, b = reg.Wp_a.dim, reg.Wp_b.dim
    if b == 0:
        return np.zeros((0, 0)), np.zeros((a, 0))
    stacked = np.hstack([reg.data.op @ reg.Wp_b.basis, -reg.Wp_a.basis])
    _, right, _ = svd_kernels(stacked, tol)
    return right[:b], right[b:]


def extend_surface_op(sops, reg: RegularDecomposition, k: Optional[int] = None,
                      tol: Optional[Tolerances] = None) -> ExtendedSurfaceOp:
    """
    표면 연산자의 W⁻ 확장

    Args:
        sops: 원래 연산자를 담은 SurfaceOps (primal 측은 D^t, dual 측은 D^n 사용), 없으면 op 로 계산
        reg: build_regular 결과

    Returns:
        ExtendedSurfaceOp (일치 잔차, 연속 상수 ≤ 1)
    """
    tol = tol or DEFAULT_TOLERANCES
    Z, Aplus = _w_plus_domain(reg, tol)
    m = Z.shape[1]
    gz = Z.T @ reg.Wp_b.gram @ Z + Aplus.T @ reg.Wp_a.gram @ Aplus
    space = InnerProductSpace(0.5 * (gz + gz.T), name="W+(op)")
    matrix = Aplus.T

    if sops is None:
        original = reg.data.op.T
    elif reg.side == PRIMAL:
        original = sops.Dt_op
    else:
        original = sops.Dn_op

    n = reg.data.X.dim
    consistency = 0.0
    if m and n:
        psi = np.eye(n)
        restricted = (reg.Wp_b.basis @ Z).T @ (original @ psi)
        extended = matrix @ (reg.Wp_a.basis.T @ psi)
        scale = np.linalg.norm(restricted) + np.linalg.norm(extended)
        diff = np.linalg.norm(restricted - extended)
        consistency = float(diff / scale) if scale > 0 else float(diff)
    continuity = operator_norm(space, reg.Wp_a.space, Aplus) if m and reg.Wp_a.dim else 0.0
    return ExtendedSurfaceOp(Z, Aplus, space, matrix, consistency, continuity)


# ─── Dual characterization ──────────────────────────────────────────────────

@dataclass(frozen=True)
class DualCharacterization:
    lower: float
    upper: float
    sampled_lower: float
    sampled_upper: float
    reconstruction: float
    spanning: bool


def check_dual_characterization(pair: ComplexPair, reg: RegularDecomposition, k: Optional[int] = None,
                                tol: Optional[Tolerances] = None,
                                samples: int = 256, seed: Optional[int] = None
                                ) -> Tuple[DualCharacterization, List[CheckRecord]]:
    """
    X' ≅ W⁻(D) 의 노름 동치

    ψ ↦ (basis_aᵀψ, basis_bᵀ opᵀ ψ) 의 whitening 특이값이 동치 상수,
    ψ = Lᵀ(basis_aᵀψ) + Vᵀ(basis_bᵀ opᵀψ) 재구성 잔차
    """
    tol = tol or DEFAULT_TOLERANCES
    seed = tol.seed + reg.k if seed is None else seed
    X = reg.data.X
    n = X.dim
    name = f"dual_characterization.{reg.side}"
    if n == 0:
        result = DualCharacterization(1.0, 1.0, 1.0, 1.0, 0.0, True)
        return result, [info(name + ".constants", 1.0, reg.k, TOPIC, upper=1.0)]

    restrict_a = reg.Wp_a.basis.T                      # a × n
    restrict_b = reg.Wp_b.basis.T @ reg.data.op.T      # b × n

    # 쌍대 노름 whitening: ψ ↦ R_X⁻ᵀψ 이 등거리, 역방향은 R_Xᵀ
    def _dual_whiten(space: InnerProductSpace, coeffs: np.ndarray) -> np.ndarray:
        if space.dim == 0:
            return coeffs
        return sla.solve_triangular(space.factor, coeffs, trans='T', lower=False)

    blocks = [_dual_whiten(reg.Wp_a.space, restrict_a @ X.factor.T)]
    if reg.Wp_b.dim:
        blocks.append(_dual_whiten(reg.Wp_b.space, restrict_b @ X.factor.T))
    whitened = np.vstack(blocks)
    s = sla.svdvals(whitened)
    lower, upper = float(s[-1]) if s.size >= n else 0.0, float(s[0])

    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((n, samples))
    psi_norm = np.linalg.norm(_dual_whiten(X, psi), axis=0)
    part_a = np.linalg.norm(_dual_whiten(reg.Wp_a.space, restrict_a @ psi), axis=0)
    part_b = np.linalg.norm(_dual_whiten(reg.Wp_b.space, restrict_b @ psi), axis=0) if reg.Wp_b.dim \
        else np.zeros(samples)
    ratio = np.sqrt(part_a ** 2 + part_b ** 2) / psi_norm

    rebuilt = reg.L.T @ (restrict_a @ psi)
    if reg.Wp_b.dim:
        rebuilt = rebuilt + reg.V.T @ (restrict_b @ psi)
    reconstruction = float(np.linalg.norm(rebuilt - psi) / np.linalg.norm(psi))

    spanning = reg.Wp_a.dim == n
    result = DualCharacterization(lower, upper, float(ratio.min()), float(ratio.max()),
                                  reconstruction, spanning)
    records = [
        expect(name + ".equivalence", lower > 0.0, reg.k, TOPIC, value=lower, upper=upper),
        gate(name + ".reconstruction", reconstruction, tol.residual, reg.k, TOPIC),
        info(name + ".constants", lower, reg.k, TOPIC, upper=upper,
             sampled_lower=result.sampled_lower, sampled_upper=result.sampled_upper, samples=samples),
    ]
    if not spanning:
        records.append(info(name + ".spanning", float(reg.Wp_a.dim), reg.k, TOPIC,
                            error=str(SpanningFailure("regular subspace does not span its domain model",
                                                      level=reg.k))))
    return result, records


# ─── Quotients & range characterization ─────────────────────────────────────

@dataclass(frozen=True, eq=False)
class RegularQuotients:
    """
    W̊_a = Wp_a ∩ ker_X, W̊_b = Wp_b ∩ ker_Y 와 몫 Wp/W̊, Ŝ : Wp_b/W̊_b → X/ker_X, D̂ = Ŝᵀ
    """
    Wnot_a: Subspace
    Wnot_b: Subspace
    T_plus_a: QuotientSpace
    T_plus_b: QuotientSpace
    Shat: np.ndarray
    Dhat: np.ndarray
    canonical: np.ndarray
    canonical_singular_values: Tuple[float, ...]


def _kernels(traces: Mapping[int, TraceSystem], reg: RegularDecomposition):
    """(ker_X, Q_X, ker_Y, Q_Y, X 위 트레이스 치역 기저)"""
    data = reg.data
    if data.side == PRIMAL:
        tx = traces[data.k]
        ty = traces.get(data.k + 1)
        ker_x, q_x = tx.ker_dual, tx.Q_dual
        rng_x = tx.B.T
        ker_y = ty.ker_dual if ty is not None else Subspace.zero(data.Y)
        q_y = ty.Q_dual if ty is not None else QuotientSpace.of(Subspace.zero(data.Y))
    else:
        tx, ty = traces[data.k + 1], traces[data.k]
        ker_x, q_x = tx.ker_primal, tx.Q_primal
        rng_x = tx.B
        ker_y, q_y = ty.ker_primal, ty.Q_primal
    return ker_x, q_x, ker_y, q_y, rng_x


def _sub_quotient(parent: Subspace, inner: Subspace) -> QuotientSpace:
    """parent 좌표계에서 parent / inner"""
    coords = parent.coords(inner.basis).reshape(parent.dim, inner.dim)
    return QuotientSpace.of(Subspace(parent.space, coords))


def build_regular_quotients(traces: Mapping[int, TraceSystem], reg: RegularDecomposition,
                            tol: Optional[Tolerances] = None) -> RegularQuotients:
    tol = tol or DEFAULT_TOLERANCES
    ker_x, q_x, ker_y, _, _ = _kernels(traces, reg)
    wnot_a = reg.Wp_a.intersect(Subspace(reg.data.X, ker_x.basis, tol))
    wnot_b = reg.Wp_b.intersect(Subspace(reg.data.Y, ker_y.basis, tol)) if reg.data.Y.dim \
        else Subspace.zero(reg.data.Y)
    t_a = _sub_quotient(reg.Wp_a, wnot_a)
    t_b = _sub_quotient(reg.Wp_b, wnot_b)

    # Ŝ [z] = [op z]
    reps_b = reg.Wp_b.basis @ t_b.complement_basis
    shat = q_x.coords(reg.data.op @ reps_b).reshape(q_x.dim, t_b.dim)

    reps_a = reg.Wp_a.basis @ t_a.complement_basis
    canonical = q_x.coords(reps_a).reshape(q_x.dim, t_a.dim)
    if canonical.size:
        sv = tuple(float(v) for v in operator_singular_values(t_a.space, q_x.space, canonical))
    else:
        sv = ()
    return RegularQuotients(wnot_a, wnot_b, t_a, t_b, shat, shat.T.copy(), canonical, sv)


@dataclass(frozen=True)
class RangeCharacterization:
    residual: float
    spanning: bool
    characterized_dim: int
    range_dim: int
    canonical_bijective: bool
    hat_consistency: float


def check_range_characterization(traces: Mapping[int, TraceSystem], reg: RegularDecomposition,
                                 k: Optional[int] = None, tol: Optional[Tolerances] = None,
                                 sops: Optional[Mapping] = None
                                 ) -> Tuple[RangeCharacterization, List[CheckRecord]]:
    """
    트레이스 치역 = W̊_a 의 소멸자 (Wp_a 좌표) 검사와 몫 재정식화

    W̊_a 가 ker_X 를 생성하지 못하면 SpanningFailure 를 INFO 로 기록하고 판정하지 않는다.
    """
    tol = tol or DEFAULT_TOLERANCES
    name = f"range_characterization.{reg.side}"
    ker_x, q_x, _, q_y, rng_x = _kernels(traces, reg)
    rq = build_regular_quotients(traces, reg, tol)
    a = reg.Wp_a.dim

    # 특성화 집합 S ⊆ (Wp_a)'
    wnot_coords = reg.Wp_a.coords(rq.Wnot_a.basis).reshape(a, rq.Wnot_a.dim)
    ext = extend_surface_op(None, reg, tol=tol)
    wnot_b_in_ext = _ext_coords(ext, reg, rq.Wnot_b, tol)
    conditions = [wnot_coords.T]
    if wnot_b_in_ext.size:
        conditions.append((ext.Aplus @ wnot_b_in_ext).T)
    stacked = np.vstack(conditions) if a else np.zeros((0, 0))
    if a and stacked.shape[0]:
        _, S, _ = svd_kernels(stacked, tol)
    else:
        S = np.eye(a)

    restricted_range = reg.Wp_a.basis.T @ range_basis(rng_x, tol) if a else np.zeros((0, 0))
    R = range_basis(restricted_range, tol) if restricted_range.size else np.zeros((a, 0))
    if a:
        res_a, res_b = subspace_residuals(S, R)
    else:
        res_a = res_b = 0.0
    residual = max(res_a, res_b)

    spanning = rq.Wnot_a.dim == ker_x.dim
    square = rq.canonical.shape[0] == rq.canonical.shape[1]
    bijective = square and (numerical_rank(rq.canonical, tol).rank == rq.canonical.shape[0]
                            if rq.canonical.size else True)

    # Ŝ 와 원래 몫 표면 연산자의 일치
    hat_consistency = 0.0
    reference = _quotient_surface(reg, sops)
    if reference is not None and rq.Shat.size:
        reps_b = reg.Wp_b.basis @ rq.T_plus_b.complement_basis
        via_s = reference @ q_y.coords(reps_b).reshape(q_y.dim, rq.T_plus_b.dim)
        scale = np.linalg.norm(rq.Shat) + np.linalg.norm(via_s)
        hat_consistency = float(np.linalg.norm(rq.Shat - via_s) / scale) if scale > 0 else 0.0

    result = RangeCharacterization(residual, spanning, S.shape[1], R.shape[1], bijective, hat_consistency)
    records = [
        info(name + ".intersection_dims", float(rq.Wnot_a.dim), reg.k, TOPIC,
             kernel=ker_x.dim, wnot_b=rq.Wnot_b.dim),
        info(name + ".canonical_map", min(rq.canonical_singular_values, default=1.0), reg.k, TOPIC,
             max=max(rq.canonical_singular_values, default=1.0)),
        gate(name + ".hat_consistency", hat_consistency, tol.residual, reg.k, TOPIC),
    ]
    if spanning:
        records.append(gate(name, residual, tol.residual, reg.k, TOPIC,
                            characterized_dim=S.shape[1], range_dim=R.shape[1]))
        records.append(expect(name + ".quotient_bijective", bijective, reg.k, TOPIC))
    else:
        failure = SpanningFailure(
            f"intersection has dim {rq.Wnot_a.dim}, kernel has dim {ker_x.dim}", level=reg.k)
        records.append(info(name, residual, reg.k, TOPIC, error=str(failure)))
    return result, records


def _ext_coords(ext: ExtendedSurfaceOp, reg: RegularDecomposition, wnot_b: Subspace,
                tol: Tolerances) -> np.ndarray:
    """W̊_b ∩ W⁺(op) 의 W⁺(op) 좌표 기저"""
    m = ext.Z.shape[1]
    if m == 0 or wnot_b.dim == 0:
        return np.zeros((m, 0))
    embedded = Subspace(reg.data.Y, reg.Wp_b.basis @ ext.Z, tol)
    common = embedded.intersect(Subspace(reg.data.Y, wnot_b.basis, tol))
    if common.dim == 0:
        return np.zeros((m, 0))
    return embedded.coords(common.basis).reshape(m, common.dim)


def _quotient_surface(reg: RegularDecomposition, sops: Optional[Mapping]):
    if not sops:
        return None
    if reg.side == PRIMAL:
        ops = sops.get(reg.k)
        return None if ops is None else ops.Sn
    ops = sops.get(reg.k)
    return None if ops is None else ops.St


# ─── Trace decomposition ────────────────────────────────────────────────────

@dataclass(frozen=True)
class TraceDecomposition:
    extension: np.ndarray
    lifting: np.ndarray
    potential: np.ndarray
    residual: float


def decompose_trace(pair: ComplexPair, traces: Mapping[int, TraceSystem], reg: RegularDecomposition,
                    phi, tol: Optional[Tolerances] = None) -> TraceDecomposition:
    """
    φ = T^t_k(lifting) − D^t_{k−1} T^t_{k−1}(potential)

    reg 는 단계 k−1 의 dual 측 분해 (X = D_k). φ 는 R(T^t_k) 의 원소.
    """
    tol = tol or DEFAULT_TOLERANCES
    if reg.side != DUAL:
        raise StructureError("trace decomposition needs a dual-side regular decomposition", level=reg.k)
    k = reg.k + 1
    ts, ts_prev = traces[k], traces[k - 1]
    coeffs = phi.coeffs if hasattr(phi, "coeffs") else np.asarray(phi, dtype=float)
    x = min_norm_extension(ts, TRACE_PRIMAL, coeffs)
    lifting = reg.lifting @ x
    potential = reg.potential @ x
    surface = pair.lift_dual_matrix(k, tol).T
    rebuilt = ts.B.T @ lifting - surface @ (ts_prev.B.T @ potential)
    scale = np.linalg.norm(coeffs)
    diff = np.linalg.norm(rebuilt - coeffs)
    residual = float(diff / scale) if scale > 0 else float(diff)
    return TraceDecomposition(x, lifting, potential, residual)
