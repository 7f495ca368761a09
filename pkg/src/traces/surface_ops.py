"""
표면 연산자 모듈
D^t_k = (Aᵀ_{k+1})', D^n_{k+1} = (A_k)' 와 몫 표면 연산자 S^t_k, S^n_{k+1}, 교환 관계 검사
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.core.checks import CheckRecord, gate
from src.core.complex_pair import ComplexPair
from src.core.config import Tolerances
from src.core.errors import WellDefinednessViolation
from src.core.linalg import QuotientSpace, Subspace, range_basis, subspace_residuals
from src.traces.trace_system import DUAL, PRIMAL, TraceSystem

TOPIC = "surface"


@dataclass(frozen=True, eq=False)
class SurfaceOps:
    """
    단계 k 의 표면 연산자 (모두 계수 행렬)

    Dt_op: Dt_k' → Dt_{k+1}' (φ ↦ φ∘Aᵀ_{k+1}), 계수 liftAt_{k+1}ᵀ φ
    Dn_op: D_{k+1}' → D_k' (ψ ↦ ψ∘A_k), 계수 liftA_kᵀ ψ
    St: Q_primal(k) → Q_primal(k+1), Sn: Q_dual(k+1) → Q_dual(k)
    St_b, Sn_b: 같은 사상을 경계조건 몫 Qb_primal / Qb_dual 위에서 본 것 (트레이스 복합체)
    """
    k: int
    lift_A: np.ndarray
    lift_At: np.ndarray
    Dt_op: np.ndarray
    Dn_op: np.ndarray
    St: np.ndarray
    Sn: np.ndarray
    wd_primal: float
    wd_dual: float
    St_b: Optional[np.ndarray] = None
    Sn_b: Optional[np.ndarray] = None
    wd_bc_primal: float = 0.0
    wd_bc_dual: float = 0.0


def _kernel_escape(image: np.ndarray, target: TraceSystem, side: str) -> float:
    """image 열들이 target 커널 밖으로 벗어난 상대 크기 (트레이스 행렬로 측정)"""
    if image.size == 0:
        return 0.0
    B = target.B
    if B.size == 0:
        return 0.0
    applied = B.T @ image if side == "primal" else B @ image
    scale = np.linalg.norm(B) * np.linalg.norm(image)
    return float(np.linalg.norm(applied) / scale) if scale > 0 else 0.0


def _subspace_escape(image: np.ndarray, target: Subspace) -> float:
    """image 열들의 target 밖 성분 (Gram 사영 잔차, 프로베니우스 상대값)"""
    if image.size == 0:
        return 0.0
    scale = np.linalg.norm(image)
    if scale == 0.0:
        return 0.0
    outside = image - target.project(image) if target.dim else image
    return float(np.linalg.norm(outside) / scale)


def _quotient_map(source: QuotientSpace, target: QuotientSpace, lift: np.ndarray) -> np.ndarray:
    return target.coords(lift @ source.complement_basis).reshape(target.dim, source.dim)


def build_surface_ops(pair: ComplexPair, traces: Mapping[int, TraceSystem], k: int,
                      tol: Optional[Tolerances] = None) -> SurfaceOps:
    """
    표면 연산자 조립

    Args:
        pair: 복합체 쌍
        traces: 단계 → TraceSystem (k, k+1 필요)
        k: 단계

    Raises:
        WellDefinednessViolation: 커널이 다음 커널로 보내지지 않음
    """
    ts0, ts1 = traces[k], traces[k + 1]
    tol = tol or ts0.tol
    lift_A = pair.lift_matrix(k, tol)            # D_{k+1} × D_k
    lift_At = pair.lift_dual_matrix(k + 1, tol)  # Dt_k × Dt_{k+1}

    wd_primal = _kernel_escape(lift_A @ ts0.ker_primal.basis, ts1, "primal")
    if wd_primal > tol.membership:
        raise WellDefinednessViolation(
            f"A_{k} maps the primal trace kernel outside the next kernel (escape {wd_primal:.3e})", level=k)
    wd_dual = _kernel_escape(lift_At @ ts1.ker_dual.basis, ts0, "dual")
    if wd_dual > tol.membership:
        raise WellDefinednessViolation(
            f"At_{k + 1} maps the dual trace kernel outside the previous kernel (escape {wd_dual:.3e})",
            level=k)

    # 경계조건 부분공간도 A_k, Aᵀ_{k+1} 로 보존되어야 경계 몫 위 사상이 정의됨 (없으면 커널 검사와 같음)
    has_bc = any(sub is not None for sub in (ts0.bc_primal, ts1.bc_primal, ts0.bc_dual, ts1.bc_dual))
    wd_bc_primal = 0.0 if not has_bc else _subspace_escape(
        lift_A @ ts0.boundary_subspace(PRIMAL).basis, ts1.boundary_subspace(PRIMAL))
    if wd_bc_primal > tol.membership:
        raise WellDefinednessViolation(
            f"A_{k} maps D(Å_{k}) outside D(Å_{k + 1}) (escape {wd_bc_primal:.3e})", level=k)
    wd_bc_dual = 0.0 if not has_bc else _subspace_escape(
        lift_At @ ts1.boundary_subspace(DUAL).basis, ts0.boundary_subspace(DUAL))
    if wd_bc_dual > tol.membership:
        raise WellDefinednessViolation(
            f"At_{k + 1} maps D(A*_{k + 1}) outside D(A*_{k}) (escape {wd_bc_dual:.3e})", level=k)

    St = _quotient_map(ts0.Q_primal, ts1.Q_primal, lift_A)
    Sn = _quotient_map(ts1.Q_dual, ts0.Q_dual, lift_At)
    return SurfaceOps(
        k=k,
        lift_A=lift_A,
        lift_At=lift_At,
        Dt_op=lift_At.T,
        Dn_op=lift_A.T,
        St=St,
        Sn=Sn,
        wd_primal=wd_primal,
        wd_dual=wd_dual,
        St_b=_quotient_map(ts0.Qb_primal, ts1.Qb_primal, lift_A),
        Sn_b=_quotient_map(ts1.Qb_dual, ts0.Qb_dual, lift_At),
        wd_bc_primal=wd_bc_primal,
        wd_bc_dual=wd_bc_dual,
    )


def surface_apply(sops: SurfaceOps, side: str, coeffs) -> np.ndarray:
    """D^t (primal) 또는 D^n (dual) 적용"""
    coeffs = np.asarray(coeffs, dtype=float)
    return sops.Dt_op @ coeffs if side == "primal" else sops.Dn_op @ coeffs


def _rel(diff: np.ndarray, *factors: np.ndarray) -> float:
    if diff.size == 0:
        return 0.0
    scale = max((np.linalg.norm(a) * np.linalg.norm(b) for a, b in factors), default=0.0)
    num = float(np.linalg.norm(diff))
    return num / scale if scale > 0 else num


def check_commuting(pair: ComplexPair, traces: Mapping[int, TraceSystem], sops: SurfaceOps,
                    k: int, tol: Optional[Tolerances] = None) -> List[CheckRecord]:
    """
    교환 관계 (i)-(iv) 와 핵심 포함관계 검사

    (i)   −D^t_k T^t_k = T^t_{k+1} A_k
    (ii)  −D^n_{k+1} T^n_{k+1} = T^n_k Aᵀ_{k+1}
    (iii) ⟪S^t[x], [z]⟫ = −⟪[x], S^n[z]⟫
    (iv)  K_{k+1} S^t = −(S^n)' K_k
    """
    ts0, ts1 = traces[k], traces[k + 1]
    tol = tol or ts0.tol
    lvl0, lvl1 = pair[k], pair[k + 1]
    integer_path = lvl0.lift_A is not None and lvl1.lift_At is not None
    exact_tol = tol.exact if integer_path else tol.residual

    Tt0, Tt1 = ts0.B.T, ts1.B.T
    lhs_i = -sops.Dt_op @ Tt0
    rhs_i = Tt1 @ sops.lift_A
    res_i = _rel(lhs_i - rhs_i, (sops.Dt_op, Tt0), (Tt1, sops.lift_A))

    Tn0, Tn1 = ts0.dual_sign * ts0.B, ts1.dual_sign * ts1.B
    lhs_ii = -sops.Dn_op @ Tn1
    rhs_ii = Tn0 @ sops.lift_At
    res_ii = _rel(lhs_ii - rhs_ii, (sops.Dn_op, Tn1), (Tn0, sops.lift_At))

    K0, K1 = ts0.K, ts1.K
    res_iii = _rel(sops.St.T @ K1 + K0 @ sops.Sn, (sops.St, K1), (K0, sops.Sn))
    res_iv = _rel(K1.T @ sops.St + sops.Sn.T @ K0.T, (K1, sops.St), (sops.Sn, K0))

    # D^t_k R(T^t_k) ⊆ R(T^t_{k+1})
    source = range_basis(Tt0, tol)
    mapped = sops.Dt_op @ source
    target = range_basis(Tt1, tol)
    if mapped.size and np.linalg.norm(mapped) > 0:
        mapped_basis = range_basis(mapped, tol)
        containment, _ = subspace_residuals(mapped_basis, target)
    else:
        containment = 0.0

    return [
        gate("commuting.i", res_i, exact_tol, k, TOPIC),
        gate("commuting.ii", res_ii, exact_tol, k, TOPIC),
        gate("commuting.iii", res_iii, tol.residual, k, TOPIC),
        gate("commuting.iv", res_iv, tol.residual, k, TOPIC),
        gate("key_containment", containment, tol.residual, k, TOPIC),
        gate("well_defined.primal", sops.wd_primal, tol.membership, k, TOPIC),
        gate("well_defined.dual", sops.wd_dual, tol.membership, k, TOPIC),
        gate("well_defined.bc_primal", sops.wd_bc_primal, tol.membership, k, TOPIC),
        gate("well_defined.bc_dual", sops.wd_bc_dual, tol.membership, k, TOPIC),
    ]


def build_levels(pair: ComplexPair, traces: Mapping[int, TraceSystem],
                 tol: Optional[Tolerances] = None
                 ) -> Tuple[Dict[int, SurfaceOps], Dict[int, WellDefinednessViolation]]:
    """
    단계마다 따로 조립

    Returns:
        (조립된 단계 → SurfaceOps, 실패한 단계 → WellDefinednessViolation)
    """
    built: Dict[int, SurfaceOps] = {}
    failures: Dict[int, WellDefinednessViolation] = {}
    for k in sorted(traces):
        if k + 1 not in traces:
            continue
        try:
            built[k] = build_surface_ops(pair, traces, k, tol)
        except WellDefinednessViolation as e:
            failures[k] = e
    return built, failures


def build_all(pair: ComplexPair, traces: Mapping[int, TraceSystem],
              tol: Optional[Tolerances] = None) -> Dict[int, SurfaceOps]:
    """
    연속한 모든 단계 쌍의 SurfaceOps (k → SurfaceOps)

    Raises:
        WellDefinednessViolation: 가장 낮은 실패 단계
    """
    built, failures = build_levels(pair, traces, tol)
    if failures:
        raise failures[min(failures)]
    return built
