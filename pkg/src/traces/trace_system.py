"""
트레이스 기계 모듈
트레이스 행렬 B_k, 커널, 몫 트레이스 공간, 사영, 최소 노름 확장, 쌍대 짝짓기 K_k
"""

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from src.core.checks import CheckRecord, expect, gate, info
from src.core.complex_pair import ComplexLevel, ComplexPair
from src.core.config import Tolerances
from src.core.errors import NotInRangeError, RankInstabilityWarning, StructureError
from src.core.linalg import (
    DEFAULT_TOLERANCES,
    DualVector,
    QuotientSpace,
    RankInfo,
    Subspace,
    annihilator,
    bilinear_norm,
    dual_norm,
    numerical_rank,
    range_basis,
    subspace_residuals,
    svd_kernels,
)

PRIMAL = "primal"
DUAL = "dual"
TOPIC = "trace"


def _check_side(side: str) -> None:
    if side not in (PRIMAL, DUAL):
        raise StructureError(f"side must be 'primal' or 'dual', got {side!r}")


@dataclass(frozen=True, eq=False)
class TraceSystem:
    """
    단계 k 의 트레이스 데이터

    T^t x 의 계수는 Bᵀx (Dt 위의 범함수), T^n y 의 계수는 dual_sign·B y (D 위의 범함수).
    dual_sign = -1 이면 ⟨T^t x, y⟩ = -⟨T^n y, x⟩ = b(x, y).
    """
    k: int
    level: ComplexLevel
    B: np.ndarray
    ker_primal: Subspace
    ker_dual: Subspace
    Q_primal: QuotientSpace
    Q_dual: QuotientSpace
    rank: RankInfo
    tol: Tolerances = DEFAULT_TOLERANCES
    dual_sign: int = -1
    rank_warnings: Tuple[str, ...] = field(default_factory=tuple)
    bc_primal: Optional[Subspace] = None
    bc_dual: Optional[Subspace] = None

    def boundary_subspace(self, side: str) -> Subspace:
        """경계조건 부분공간 D(Å_k) 또는 D(A*_k) 모델 (없으면 트레이스 커널)"""
        _check_side(side)
        sub = self.bc_primal if side == PRIMAL else self.bc_dual
        return sub if sub is not None else self.kernel(side)

    @cached_property
    def Qb_primal(self) -> QuotientSpace:
        """트레이스 공간 D_k / D(Å_k)"""
        return self.Q_primal if self.bc_primal is None else QuotientSpace.of(self.bc_primal)

    @cached_property
    def Qb_dual(self) -> QuotientSpace:
        """트레이스 공간 Dt_k / D(A*_k)"""
        return self.Q_dual if self.bc_dual is None else QuotientSpace.of(self.bc_dual)

    def boundary_quotient(self, side: str) -> QuotientSpace:
        _check_side(side)
        return self.Qb_primal if side == PRIMAL else self.Qb_dual

    @property
    def P_t(self) -> np.ndarray:
        """D 위에서 ker_primal 의 Gram 직교여공간으로의 사영"""
        return self.Q_primal.projector

    @property
    def P_n(self) -> np.ndarray:
        return self.Q_dual.projector

    def quotient(self, side: str) -> QuotientSpace:
        _check_side(side)
        return self.Q_primal if side == PRIMAL else self.Q_dual

    def kernel(self, side: str) -> Subspace:
        _check_side(side)
        return self.ker_primal if side == PRIMAL else self.ker_dual

    @cached_property
    def K(self) -> np.ndarray:
        return build_K(self)


def assemble_trace(pair: ComplexPair, k: int, tol: Optional[Tolerances] = None) -> TraceSystem:
    """
    단계 k 의 트레이스 시스템 조립

    Args:
        pair: 검증된 복합체 쌍
        k: 단계
        tol: 허용오차 (계수 판정)

    Returns:
        TraceSystem (불안정 계수 경고는 rank_warnings 에도 기록)
    """
    tol = tol or DEFAULT_TOLERANCES
    level = pair[k]
    B = level.pairing.matrix
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RankInstabilityWarning)
        left, right, rank = svd_kernels(B, tol)
    messages = tuple(str(w.message) for w in caught if issubclass(w.category, RankInstabilityWarning))
    for message in messages:
        warnings.warn(f"[level {k}] {message}", RankInstabilityWarning, stacklevel=2)

    ker_primal = Subspace(level.D, left, tol)
    ker_dual = Subspace(level.Dt, right, tol)
    bc_primal, bc_dual = boundary_condition_subspaces(pair, k, tol)
    return TraceSystem(
        k=k,
        level=level,
        B=B,
        ker_primal=ker_primal,
        ker_dual=ker_dual,
        Q_primal=QuotientSpace.of(ker_primal),
        Q_dual=QuotientSpace.of(ker_dual),
        rank=rank,
        tol=tol,
        rank_warnings=messages,
        bc_primal=bc_primal,
        bc_dual=bc_dual,
    )


def boundary_condition_subspaces(pair: ComplexPair, k: int, tol: Optional[Tolerances] = None
                                 ) -> Tuple[Optional[Subspace], Optional[Subspace]]:
    """
    메타데이터의 내부 자유도 번호로 만든 좌표 부분공간 (D(Å_k), D(A*_k))

    이산 트레이스 커널은 D(Å_k) 보다 클 수 있으므로 (경계 면 평균만 보는 짝),
    트레이스 공간 D/D(Å) 는 이 부분공간으로 나눈다. 번호가 없으면 (None, None).
    """
    tol = tol or DEFAULT_TOLERANCES
    entry = ((pair.meta or {}).get("interior") or {}).get(str(k))
    if entry is None:
        return None, None
    level = pair[k]

    def _coordinate(space, key: str) -> Subspace:
        idx = np.asarray(entry.get(key, []), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= space.dim):
            raise StructureError(f"interior index out of range for {space.name} (dim {space.dim})", level=k)
        return Subspace(space, np.eye(space.dim)[:, idx], tol)

    return _coordinate(level.D, "D"), _coordinate(level.Dt, "Dt")


def assemble_all(pair: ComplexPair, tol: Optional[Tolerances] = None) -> List[TraceSystem]:
    return [assemble_trace(pair, k, tol) for k in pair.indices()]


# ─── Trace application ──────────────────────────────────────────────────────

def trace_apply(ts: TraceSystem, side: str, x) -> DualVector:
    """
    트레이스 적용

    primal: T^t x = Bᵀx (Dt 위 범함수), dual: T^n y = dual_sign·B y (D 위 범함수)
    """
    _check_side(side)
    x = np.asarray(x, dtype=float)
    if side == PRIMAL:
        if x.shape[0] != ts.level.D.dim:
            raise StructureError(f"x has {x.shape[0]} entries, D has dim {ts.level.D.dim}", level=ts.k)
        return DualVector(ts.level.Dt, ts.B.T @ x)
    if x.shape[0] != ts.level.Dt.dim:
        raise StructureError(f"y has {x.shape[0]} entries, Dt has dim {ts.level.Dt.dim}", level=ts.k)
    return DualVector(ts.level.D, ts.dual_sign * (ts.B @ x))


def trace_matrix(ts: TraceSystem, side: str) -> np.ndarray:
    """트레이스 연산자의 계수 행렬 (열마다 한 기저벡터의 트레이스)"""
    _check_side(side)
    return ts.B.T if side == PRIMAL else ts.dual_sign * ts.B


def _domain(ts: TraceSystem, side: str):
    return ts.level.D if side == PRIMAL else ts.level.Dt


def _codomain(ts: TraceSystem, side: str):
    return ts.level.Dt if side == PRIMAL else ts.level.D


# ─── Ranges & norms ─────────────────────────────────────────────────────────

def check_range_annihilator(ts: TraceSystem, tol: Optional[Tolerances] = None) -> List[CheckRecord]:
    """rowspace(B) = ker_dual°, colspace(B) = ker_primal° (상호 사영 잔차)"""
    tol = tol or ts.tol
    records = []
    for name, image, kernel in (
        ("range_annihilator.primal", ts.B.T, ts.ker_dual),
        ("range_annihilator.dual", ts.B, ts.ker_primal),
    ):
        rng_basis = range_basis(image, tol)
        ann = annihilator(kernel).basis
        if ann.shape[1]:
            ann, _ = np.linalg.qr(ann)
        a, b = subspace_residuals(rng_basis, ann)
        dims_ok = rng_basis.shape[1] == ann.shape[1]
        records.append(gate(name, max(a, b), tol.residual, ts.k, TOPIC,
                            range_dim=rng_basis.shape[1], annihilator_dim=ann.shape[1]))
        records.append(expect(name + ".dim", dims_ok, ts.k, TOPIC,
                              value=rng_basis.shape[1] - ann.shape[1]))
    return records


def quotient_norm(ts: TraceSystem, side: str, x) -> float:
    """‖[x]‖ = ‖P x‖"""
    return ts.quotient(side).norm(x)


@dataclass(frozen=True)
class IsometryDefect:
    trace_norm: float
    quotient_norm: float
    ratio: float


def isometry_defect(ts: TraceSystem, side: str, x, boundary: bool = False) -> IsometryDefect:
    """
    (‖T x‖', ‖[x]‖, 비율), 비율은 항상 (0, 1]

    boundary=True 면 ‖[x]‖ 를 D/D(Å) 몫 노름으로 잰다 (트레이스 커널 몫 노름 이상).
    x 가 커널에 있으면 (0, 0, 1)
    """
    x = np.asarray(x, dtype=float)
    qn = ts.boundary_quotient(side).norm(x) if boundary else quotient_norm(ts, side, x)
    tn = dual_norm(_codomain(ts, side), trace_apply(ts, side, x))
    scale = _domain(ts, side).norm(x)
    if scale == 0.0 or qn <= ts.tol.membership * scale:
        return IsometryDefect(0.0, 0.0, 1.0)
    return IsometryDefect(tn, qn, tn / qn)


def trace_operator_norm(ts: TraceSystem, side: str = PRIMAL) -> float:
    """트레이스 연산자 노름 sup ‖T x‖'/‖x‖ (= ‖b‖)"""
    if ts.B.size == 0:
        return 0.0
    return bilinear_norm(ts.level.D, ts.level.Dt, ts.B)


def isometry_ratio_range(ts: TraceSystem, side: str = PRIMAL) -> Tuple[float, float]:
    """몫공간 위 ‖T x‖'/‖[x]‖ 의 최소·최대 (몫공간이 0 이면 (1, 1))"""
    Q = ts.quotient(side)
    if Q.dim == 0:
        return 1.0, 1.0
    T = trace_matrix(ts, side) @ Q.complement_basis
    cod = _codomain(ts, side)
    # 쌍대 노름 whitening: R⁻ᵀ T, 몫 노름 whitening: R_Q⁻¹
    a = sla.solve_triangular(cod.factor, T, trans='T', lower=False)
    a = sla.solve_triangular(Q.space.factor, a.T, trans='T', lower=False).T
    s = sla.svdvals(a)
    return float(s[-1]), float(s[0])


# ─── Extensions ─────────────────────────────────────────────────────────────

def min_norm_extension(ts: TraceSystem, side: str, phi) -> np.ndarray:
    """
    φ 의 최소 그래프 노름 확장 x (T x = φ, x ⊥ 커널)

    Raises:
        NotInRangeError: φ 가 트레이스 치역 밖 성분을 가짐
    """
    _check_side(side)
    cod = _codomain(ts, side)
    c = phi.coeffs if isinstance(phi, DualVector) else np.asarray(phi, dtype=float)
    if c.shape[0] != cod.dim:
        raise StructureError(f"functional has {c.shape[0]} coefficients, expected {cod.dim}", level=ts.k)
    Q = ts.quotient(side)
    nc = np.linalg.norm(c)
    if nc == 0.0:
        return np.zeros(_domain(ts, side).dim)
    if Q.dim == 0:
        raise NotInRangeError(f"trace range is {{0}} but functional has norm {nc:.3e}", level=ts.k)
    system = trace_matrix(ts, side) @ Q.complement_basis
    z = sla.lstsq(system, c)[0]
    residual = float(np.linalg.norm(system @ z - c) / nc)
    if residual > ts.tol.membership:
        raise NotInRangeError(f"functional is outside the trace range (residual {residual:.3e})", level=ts.k)
    return Q.complement_basis @ z


@dataclass(frozen=True)
class HarmonicExtension:
    representable: bool
    x: Optional[np.ndarray]
    lift_residual: float
    agreement: Optional[float]


def harmonic_extension(ts: TraceSystem, phi) -> HarmonicExtension:
    """
    −Aᵀ(Riesz⁻¹ φ) 를 D 좌표로 들어 올려 최소 노름 확장과 비교

    들어 올림이 불가능하면 representable=False
    """
    level = ts.level
    c = phi.coeffs if isinstance(phi, DualVector) else np.asarray(phi, dtype=float)
    y = level.Dt.solve(c)
    image = -(level.At @ y)
    if level.D.dim == 0:
        return HarmonicExtension(False, None, float(np.linalg.norm(image)), None)
    x = sla.lstsq(level.inj_D, image)[0]
    scale = np.linalg.norm(image)
    lift_residual = float(np.linalg.norm(level.inj_D @ x - image) / scale) if scale > 0 else 0.0
    if lift_residual > ts.tol.residual:
        return HarmonicExtension(False, None, lift_residual, None)
    reference = min_norm_extension(ts, PRIMAL, c)
    ref_norm = level.D.norm(reference)
    diff = level.D.norm(x - reference)
    agreement = diff / ref_norm if ref_norm > 0 else diff
    return HarmonicExtension(True, x, lift_residual, float(agreement))


# ─── Duality ────────────────────────────────────────────────────────────────

def duality_pairing(ts: TraceSystem, x, y) -> float:
    """⟪[x],[y]⟫ = b(P x, P y), 대표원과 무관"""
    px = ts.P_t @ np.asarray(x, dtype=float)
    py = ts.P_n @ np.asarray(y, dtype=float)
    return float(px @ ts.B @ py)


def build_K(ts: TraceSystem) -> np.ndarray:
    """K_k 의 행렬: 몫 좌표 ξ, η 에 대해 ⟪ξ, η⟫ = ξᵀ K η"""
    return ts.Q_primal.complement_basis.T @ ts.B @ ts.Q_dual.complement_basis


def duality_norm(ts: TraceSystem) -> float:
    """몫 노름 사이 K 의 노름 (≤ 1)"""
    K = ts.K
    if K.size == 0:
        return 0.0
    return bilinear_norm(ts.Q_primal.space, ts.Q_dual.space, K)


# ─── Identities ─────────────────────────────────────────────────────────────

def _rel(value: float, scale: float) -> float:
    return value / scale if scale > 0 else value


def trace_identities(ts: TraceSystem, samples: Optional[int] = None,
                     seed: Optional[int] = None) -> List[CheckRecord]:
    """
    트레이스 단계의 모든 정확한 항등식 검사

    커널 잔차, 몫 차원, 단측 등거리 부등식, π = (I)⁻¹T, 부분적분 폐합, 대표원 이동 불변성,
    K 의 전단사성과 노름
    """
    tol = ts.tol
    samples = tol.samples if samples is None else samples
    seed = tol.seed + ts.k if seed is None else seed
    D, Dt, B, k = ts.level.D, ts.level.Dt, ts.B, ts.k
    records: List[CheckRecord] = []
    bscale = float(np.abs(B).max()) if B.size else 0.0

    left_res = np.abs(ts.ker_primal.basis.T @ B).max() if B.size and ts.ker_primal.dim else 0.0
    right_res = np.abs(B @ ts.ker_dual.basis).max() if B.size and ts.ker_dual.dim else 0.0
    records.append(gate("kernel.primal", _rel(float(left_res), bscale), tol.residual, k, TOPIC,
                        dim=ts.ker_primal.dim))
    records.append(gate("kernel.dual", _rel(float(right_res), bscale), tol.residual, k, TOPIC,
                        dim=ts.ker_dual.dim))
    records.append(expect("quotient.dims", ts.Q_primal.dim == ts.rank.rank == ts.Q_dual.dim, k, TOPIC,
                          value=ts.rank.rank, primal=ts.Q_primal.dim, dual=ts.Q_dual.dim))
    records.append(gate("quotient.orthogonality",
                        max(ts.Q_primal.orthogonality_residual(), ts.Q_dual.orthogonality_residual()),
                        tol.residual, k, TOPIC))
    records.append(info("rank.unstable", float(ts.rank.unstable), k, TOPIC, tau=ts.rank.tau,
                        warnings=list(ts.rank_warnings)))
    records.append(expect("trace.sign", ts.dual_sign == -1, k, TOPIC, value=ts.dual_sign))

    if D.dim and Dt.dim:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((D.dim, samples))
        Y = rng.standard_normal((Dt.dim, samples))

        # ‖T^t x‖' ≤ ‖[x]‖ ≤ ‖x‖
        tn = np.linalg.norm(sla.solve_triangular(Dt.factor, B.T @ X, trans='T', lower=False), axis=0)
        qn = np.linalg.norm(ts.Q_primal.space.whiten(ts.Q_primal.coords(X)), axis=0) \
            if ts.Q_primal.dim else np.zeros(samples)
        xn = np.linalg.norm(D.whiten(X), axis=0)
        slack = 1e-12
        violations = int(np.count_nonzero(tn > qn * (1 + slack) + slack * xn)
                         + np.count_nonzero(qn > xn * (1 + slack)))
        records.append(expect("trace_bound", violations == 0, k, TOPIC, value=violations,
                              samples=samples, seed=seed))
        lo, hi = isometry_ratio_range(ts, PRIMAL)
        records.append(info("isometry_ratio.min", lo, k, TOPIC, max=hi))

        # 쌍대 측도 동일
        tn_d = np.linalg.norm(sla.solve_triangular(D.factor, B @ Y, trans='T', lower=False), axis=0)
        qn_d = np.linalg.norm(ts.Q_dual.space.whiten(ts.Q_dual.coords(Y)), axis=0) \
            if ts.Q_dual.dim else np.zeros(samples)
        yn = np.linalg.norm(Dt.whiten(Y), axis=0)
        violations = int(np.count_nonzero(tn_d > qn_d * (1 + slack) + slack * yn)
                         + np.count_nonzero(qn_d > yn * (1 + slack)))
        records.append(expect("trace_bound.dual", violations == 0, k, TOPIC, value=violations,
                              samples=samples, seed=seed))

        # π^t = (I^t)⁻¹ T^t : 최소 노름 확장의 동치류
        m = min(samples, 64)
        worst = 0.0
        worst_dual = 0.0
        for j in range(m):
            x = X[:, j]
            nx = D.norm(x)
            xhat = min_norm_extension(ts, PRIMAL, trace_apply(ts, PRIMAL, x))
            worst = max(worst, _rel(ts.Q_primal.norm(x - xhat), nx))
            y = Y[:, j]
            ny = Dt.norm(y)
            yhat = min_norm_extension(ts, DUAL, trace_apply(ts, DUAL, y))
            worst_dual = max(worst_dual, _rel(ts.Q_dual.norm(y - yhat), ny))
        records.append(gate("quotient_map.primal", worst, tol.membership, k, TOPIC, samples=m))
        records.append(gate("quotient_map.dual", worst_dual, tol.membership, k, TOPIC, samples=m))

        # 부분적분 폐합 b(x,y) = ⟪π x, π y⟫ 과 대표원 이동 불변성
        direct = np.einsum("is,ij,js->s", X[:, :m], B, Y[:, :m])
        through = np.einsum("is,ij,js->s", ts.Q_primal.coords(X[:, :m]), ts.K, ts.Q_dual.coords(Y[:, :m])) \
            if ts.K.size else np.zeros(m)
        scale = np.linalg.norm(D.whiten(X[:, :m]), axis=0) * np.linalg.norm(Dt.whiten(Y[:, :m]), axis=0)
        records.append(gate("integration_by_parts", float(np.max(np.abs(direct - through) / scale)),
                            tol.residual, k, TOPIC))
        if ts.ker_primal.dim:
            shift = ts.ker_primal.basis @ rng.standard_normal((ts.ker_primal.dim, m))
            shifted = np.array([duality_pairing(ts, X[:, j] + shift[:, j], Y[:, j]) for j in range(m)])
            base = np.array([duality_pairing(ts, X[:, j], Y[:, j]) for j in range(m)])
            records.append(gate("duality.shift", float(np.max(np.abs(shifted - base) / scale)),
                                tol.residual, k, TOPIC))

    K = ts.K
    k_rank = numerical_rank(K, tol).rank if K.size else 0
    records.append(expect("duality.bijective", k_rank == ts.Q_primal.dim == ts.Q_dual.dim, k, TOPIC,
                          value=k_rank))
    knorm = duality_norm(ts)
    records.append(gate("duality.norm", max(knorm - 1.0, 0.0), tol.exact, k, TOPIC, norm=knorm))
    return records


# ─── Informational identities ───────────────────────────────────────────────

def perp_identity_diagnostics(ts: TraceSystem) -> List[CheckRecord]:
    """
    x ⊥ 커널에 대해 (AᵀA + id)x = 0 과 ‖Ax‖_Dt = ‖x‖_D 의 잔차 (A x 가 Dt 로 들어 올려질 때만)

    유한요소 모델에서는 들어 올림이 보장되지 않으므로 INFO
    """
    level, k = ts.level, ts.k
    C = ts.Q_primal.complement_basis
    if C.shape[1] == 0 or level.Dt.dim == 0:
        return [info("perp_identity", None, k, TOPIC, representable=False)]
    image = level.A @ C
    c = sla.lstsq(level.inj_Dt, image)[0]
    scale = np.linalg.norm(image)
    lift_res = float(np.linalg.norm(level.inj_Dt @ c - image) / scale) if scale > 0 else 0.0
    if lift_res > ts.tol.residual:
        return [info("perp_identity", None, k, TOPIC, representable=False, lift_residual=lift_res)]
    harmonic = level.At @ c + level.inj_D @ C
    hres = float(np.linalg.norm(harmonic) / max(np.linalg.norm(level.inj_D @ C), 1e-300))
    iso = max(abs(level.Dt.norm(c[:, j]) - level.D.norm(C[:, j])) / level.D.norm(C[:, j])
              for j in range(C.shape[1]))
    return [
        info("perp_identity", hres, k, TOPIC, representable=True),
        info("perp_isometry", float(iso), k, TOPIC),
    ]


def riesz_identity_diagnostics(ts: TraceSystem) -> List[CheckRecord]:
    """φ ∈ 트레이스 치역에 대해 (A Aᵀ + id) R⁻¹ φ = 0 의 잔차 (Aᵀ R⁻¹φ 가 D 로 들어 올려질 때만)"""
    level, k = ts.level, ts.k
    if ts.Q_primal.dim == 0:
        return [info("riesz_identity", None, k, TOPIC, representable=False)]
    phis = ts.B.T @ ts.Q_primal.complement_basis
    Y = level.Dt.solve(phis)
    image = level.At @ Y
    x = sla.lstsq(level.inj_D, image)[0] if level.D.dim else np.zeros((0, Y.shape[1]))
    scale = np.linalg.norm(image)
    lift_res = float(np.linalg.norm(level.inj_D @ x - image) / scale) if scale > 0 else 0.0
    if lift_res > ts.tol.residual:
        return [info("riesz_identity", None, k, TOPIC, representable=False, lift_residual=lift_res)]
    residual = level.A @ x + level.inj_Dt @ Y
    value = float(np.linalg.norm(residual) / max(np.linalg.norm(level.inj_Dt @ Y), 1e-300))
    return [info("riesz_identity", value, k, TOPIC, representable=True)]


def harmonic_extension_diagnostics(ts: TraceSystem, seed: int) -> List[CheckRecord]:
    """임의 트레이스 범함수에서 리터럴 조화 확장과 최소 노름 확장의 일치도"""
    if ts.Q_primal.dim == 0:
        return [info("harmonic_extension", None, ts.k, TOPIC, representable=False)]
    rng = np.random.default_rng(seed)
    x = ts.Q_primal.complement_basis @ rng.standard_normal(ts.Q_primal.dim)
    result = harmonic_extension(ts, trace_apply(ts, PRIMAL, x))
    return [info("harmonic_extension", result.agreement, ts.k, TOPIC,
                 representable=result.representable, lift_residual=result.lift_residual)]
