"""
유계 복합체와 코호몰로지
트레이스 복합체, 정의역 복합체, 경계조건 복합체를 같은 BoundedComplex 로 다룬다
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from src.core.checks import CheckRecord, expect, gate, info
from src.core.complex_pair import ComplexPair
from src.core.config import Tolerances
from src.core.errors import StructureError
from src.core.linalg import DEFAULT_TOLERANCES, InnerProductSpace, numerical_rank
from src.traces.surface_ops import SurfaceOps
from src.traces.trace_system import PRIMAL, TraceSystem

TOPIC = "trace-complex"
BOUNDARY = "boundary"
KERNEL = "kernel"


@dataclass(frozen=True, eq=False)
class BoundedComplex:
    """
    V_0 → V_1 → … → V_m (maps[i] : V_i → V_{i+1})

    degrees[i] 는 V_i 의 원래 단계 번호
    """
    spaces: Tuple[InnerProductSpace, ...]
    maps: Tuple[np.ndarray, ...]
    degrees: Tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        if len(self.maps) != max(len(self.spaces) - 1, 0):
            raise StructureError(f"{len(self.spaces)} spaces need {len(self.spaces) - 1} maps, got {len(self.maps)}")
        for i, d in enumerate(self.maps):
            expected = (self.spaces[i + 1].dim, self.spaces[i].dim)
            if d.shape != expected:
                raise StructureError(f"map {i} has shape {d.shape}, expected {expected}",
                                     level=self.degrees[i])

    @property
    def dims(self) -> List[int]:
        return [s.dim for s in self.spaces]

    def complex_residuals(self) -> List[float]:
        """‖d_{i+1} d_i‖ / (‖d_{i+1}‖‖d_i‖)"""
        out = []
        for d0, d1 in zip(self.maps, self.maps[1:]):
            prod = d1 @ d0
            if prod.size == 0:
                out.append(0.0)
                continue
            scale = np.linalg.norm(d1) * np.linalg.norm(d0)
            out.append(float(np.linalg.norm(prod) / scale) if scale > 0 else 0.0)
        return out

    def whitened(self, i: int) -> np.ndarray:
        """Gram 정규직교 좌표에서의 d_i = R_{i+1} d_i R_i⁻¹"""
        d = self.maps[i]
        if d.size == 0:
            return d.copy()
        left = self.spaces[i + 1].whiten(d)
        if self.spaces[i].dim == 0:
            return left
        return sla.solve_triangular(self.spaces[i].factor, left.T, trans="T", lower=False).T


@dataclass(frozen=True)
class Cohomology:
    """계수 기반 차원과 Hodge 라플라시안 영차원"""
    by_rank: List[int]
    by_hodge: List[int]
    smallest_eigenvalues: List[Optional[float]]
    unstable: bool = False
    degrees: List[int] = field(default_factory=list)

    @property
    def agree(self) -> bool:
        return self.by_rank == self.by_hodge

    @property
    def dims(self) -> List[int]:
        return self.by_rank


def cohomology_dims(complex_: BoundedComplex, tol: Optional[Tolerances] = None) -> Cohomology:
    """
    dim H^i = dim V_i − rank d_i − rank d_{i−1} 와 라플라시안 d*d + dd* 의 영차원

    Returns:
        Cohomology (두 계산 결과와 가장 작은 0 아닌 고유값)
    """
    tol = tol or DEFAULT_TOLERANCES
    m = len(complex_.spaces)
    dw = [complex_.whitened(i) for i in range(m - 1)]
    ranks = []
    unstable = False
    for d in dw:
        info_ = numerical_rank(d, tol)
        ranks.append(info_.rank)
        unstable = unstable or info_.unstable

    by_rank, by_hodge, smallest = [], [], []
    for i in range(m):
        n = complex_.spaces[i].dim
        r_out = ranks[i] if i < m - 1 else 0
        r_in = ranks[i - 1] if i > 0 else 0
        by_rank.append(n - r_out - r_in)

        lap = np.zeros((n, n))
        if i < m - 1 and dw[i].size:
            lap += dw[i].T @ dw[i]
        if i > 0 and dw[i - 1].size:
            lap += dw[i - 1] @ dw[i - 1].T
        if n == 0:
            by_hodge.append(0)
            smallest.append(None)
            continue
        lap_info = numerical_rank(0.5 * (lap + lap.T), tol)
        unstable = unstable or lap_info.unstable
        by_hodge.append(n - lap_info.rank)
        s = lap_info.singular_values
        smallest.append(float(s[lap_info.rank - 1]) if lap_info.rank > 0 else None)
    return Cohomology(by_rank, by_hodge, smallest, unstable, list(complex_.degrees))


# ─── Assembly ───────────────────────────────────────────────────────────────

def trace_levels(traces: Mapping[int, TraceSystem]) -> List[int]:
    """쌍대 정의역 모델이 0 이 아닌 단계들 (연속 구간)"""
    ks = [k for k in sorted(traces) if traces[k].level.Dt.dim > 0]
    if not ks:
        return []
    run = [ks[0]]
    for k in ks[1:]:
        if k != run[-1] + 1:
            break
        run.append(k)
    return run


def assemble_trace_complex(pair: ComplexPair, traces: Mapping[int, TraceSystem],
                           sops: Mapping[int, SurfaceOps],
                           quotient: str = BOUNDARY) -> Tuple[BoundedComplex, BoundedComplex]:
    """
    트레이스 복합체 조립

    Args:
        quotient: "boundary" 면 D/D(Å) 와 Dt/D(A*) 위 (St_b, Sn_b),
            "kernel" 이면 트레이스 커널 몫 위 (St, Sn)

    Returns:
        (기본 몫 위 S^t 복합체, 쌍대 몫 위 S^n 복합체를 차수 역순으로 놓은 복합체)
    """
    if quotient not in (BOUNDARY, KERNEL):
        raise StructureError(f"quotient must be {BOUNDARY!r} or {KERNEL!r}, got {quotient!r}")
    boundary = quotient == BOUNDARY
    ks = trace_levels(traces)
    primal_spaces = tuple((traces[k].Qb_primal if boundary else traces[k].Q_primal).space for k in ks)
    primal_maps = tuple(sops[k].St_b if boundary else sops[k].St for k in ks[:-1])
    primal = BoundedComplex(primal_spaces, primal_maps, tuple(ks), label=f"{pair.label}:trace")

    rev = ks[::-1]
    dual_spaces = tuple((traces[k].Qb_dual if boundary else traces[k].Q_dual).space for k in rev)
    dual_maps = tuple(sops[k].Sn_b if boundary else sops[k].Sn for k in rev[1:])
    dual = BoundedComplex(dual_spaces, dual_maps, tuple(rev), label=f"{pair.label}:trace-dual")
    return primal, dual


def domain_complex(pair: ComplexPair, tol: Optional[Tolerances] = None) -> BoundedComplex:
    """D_0 → D_1 → … (A_k 의 D 좌표 표현)"""
    ks = pair.indices()
    spaces = tuple(pair[k].D for k in ks)
    maps = tuple(pair.lift_matrix(k, tol) for k in ks[:-1])
    return BoundedComplex(spaces, maps, tuple(ks), label=f"{pair.label}:domain")


def bc_complex(pair: ComplexPair, traces: Mapping[int, TraceSystem],
               tol: Optional[Tolerances] = None) -> BoundedComplex:
    """경계조건 부분복합체: D(Å_k) → D(Å_{k+1}) (모델이 없는 단계는 트레이스 커널)"""
    ks = pair.indices()
    subs = {k: traces[k].boundary_subspace(PRIMAL) for k in ks}
    spaces = tuple(subs[k].space for k in ks)
    maps = []
    for k in ks[:-1]:
        image = pair.lift_matrix(k, tol) @ subs[k].basis
        maps.append(subs[k + 1].coords(image).reshape(subs[k + 1].dim, subs[k].dim))
    return BoundedComplex(spaces, tuple(maps), tuple(ks), label=f"{pair.label}:bc")


def check_trace_complex(pair: ComplexPair, traces: Mapping[int, TraceSystem],
                        sops: Mapping[int, SurfaceOps],
                        tol: Optional[Tolerances] = None) -> Tuple[List[CheckRecord], Dict]:
    """
    트레이스 복합체 성질과 코호몰로지 기록

    Returns:
        (검사 기록, {"trace": [...], "trace_dual": [...]} 코호몰로지 차원)
    """
    tol = tol or DEFAULT_TOLERANCES
    records: List[CheckRecord] = []
    primal, dual = assemble_trace_complex(pair, traces, sops)
    for name, cx in (("St", primal), ("Sn", dual)):
        for deg, res in zip(cx.degrees, cx.complex_residuals()):
            records.append(gate(f"complex.{name}", res, tol.residual, deg, TOPIC))

    # D^t_{k+1} D^t_k = 0
    for k in sorted(sops):
        if k + 1 in sops:
            prod = sops[k + 1].Dt_op @ sops[k].Dt_op
            scale = np.linalg.norm(sops[k + 1].Dt_op) * np.linalg.norm(sops[k].Dt_op)
            res = float(np.linalg.norm(prod) / scale) if prod.size and scale > 0 else 0.0
            records.append(gate("complex.Dt", res, tol.exact, k, TOPIC))

    coh = cohomology_dims(primal, tol)
    coh_dual = cohomology_dims(dual, tol)
    records.append(expect("cohomology.agree", coh.agree and coh_dual.agree, None, TOPIC,
                          rank=coh.by_rank, hodge=coh.by_hodge))
    records.append(expect("cohomology.dual_match", coh.by_rank == coh_dual.by_rank[::-1], None, TOPIC,
                          primal=coh.by_rank, dual=coh_dual.by_rank[::-1]))
    records.append(info("cohomology.trace", None, None, TOPIC, dims=coh.by_rank,
                        smallest_eigenvalues=coh.smallest_eigenvalues))
    # 트레이스 커널이 D(Å) 보다 크면 커널 몫 복합체는 경계 코호몰로지와 다를 수 있음
    if any(traces[k].bc_primal is not None for k in primal.degrees):
        by_kernel, _ = assemble_trace_complex(pair, traces, sops, quotient=KERNEL)
        records.append(info("cohomology.kernel_quotient", None, None, TOPIC,
                            dims=cohomology_dims(by_kernel, tol).by_rank, spaces=by_kernel.dims))
    return records, {"trace": coh.by_rank, "trace_dual": coh_dual.by_rank[::-1]}
