"""
검증 배터리
복합체 쌍 하나에 대해 모든 검사 블록을 순서대로 실행하고 기록과 코호몰로지, 블록별 시간을 모은다
"""

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional

import numpy as np

from src.core.checks import CheckRecord, expect, gate, info
from src.core.complex_pair import ComplexPair, validate
from src.core.config import Tolerances
from src.core.errors import (
    MeshError,
    NoDecompositionError,
    NotInRangeError,
)
from src.core.instance_io import RegularBases
from src.core.linalg import DEFAULT_TOLERANCES
from src.fem.derham import GENERATOR, boundary_complex, smith_betti
from src.fem.feec import FeecSpaces, boundary_quadrature, green_boundary_form
from src.fem.mesh import DOMAINS, EXPECTED_BOUNDARY_COMPONENTS, EXPECTED_EULER, TetMesh, build_mesh
from src.regular.decomposition import (
    DUAL,
    build_regular,
    check_dual_characterization,
    check_range_characterization,
    decompose_trace,
    decomposition_records,
    extend_surface_op,
)
from src.traces.surface_ops import build_levels, check_commuting
from src.traces.trace_complex import (
    bc_complex,
    check_trace_complex,
    cohomology_dims,
    domain_complex,
    trace_levels,
)
from src.traces.trace_system import (
    PRIMAL,
    TraceSystem,
    assemble_trace,
    check_range_annihilator,
    harmonic_extension_diagnostics,
    perp_identity_diagnostics,
    riesz_identity_diagnostics,
    trace_apply,
    trace_identities,
)

GREEN_SAMPLES = 100
# 경계 색칠 논법이 적용되는 격자 영역
GRID_DOMAINS = ("cube", "cavity", "hole")


@dataclass
class BatteryResult:
    records: List[CheckRecord] = field(default_factory=list)
    cohomology: Dict[str, List[int]] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)


@contextmanager
def _timed(result: BatteryResult, block: str) -> Iterator[List[CheckRecord]]:
    """블록 안에서 모은 기록에 블록 소요 시간을 붙인다"""
    collected: List[CheckRecord] = []
    start = time.perf_counter()
    yield collected
    elapsed = time.perf_counter() - start
    for record in collected:
        record.seconds = elapsed
    result.records.extend(collected)
    result.timings[block] = result.timings.get(block, 0.0) + elapsed


def mesh_for(pair: ComplexPair) -> Optional[TetMesh]:
    """de Rham 인스턴스 메타데이터에서 메쉬 재생성 (해당 없으면 None)"""
    meta = pair.meta or {}
    if meta.get("generator") != GENERATOR or meta.get("domain") not in DOMAINS:
        return None
    try:
        mesh = build_mesh(meta["domain"], int(meta.get("n", 0)))
    except (MeshError, ValueError, TypeError):
        return None
    return mesh if mesh.counts == meta.get("counts") else None


# ─── Blocks ─────────────────────────────────────────────────────────────────

def expected_kernel_excess(meta: Dict, k: int, side: str) -> Optional[int]:
    """
    격자 영역 k=0 기본 쪽 커널 초과분의 예측값 (그 밖에는 None)

    경계 삼각형마다 평균이 0 인 P1 함수는 정점 3색칠의 색별 상수 (합 0) 로 성분마다 2 차원.
    cube, cavity 의 두 성분, hole 의 토러스 한 성분 모두 i+j+k mod 3 색칠이 있다.
    """
    domain = meta.get("domain")
    if k != 0 or side != PRIMAL or domain not in GRID_DOMAINS:
        return None
    components = int(meta.get("boundary_components", EXPECTED_BOUNDARY_COMPONENTS[domain]))
    return 2 * components


def interior_checks(pair: ComplexPair, traces: Dict[int, TraceSystem],
                    tol: Optional[Tolerances] = None) -> List[CheckRecord]:
    """
    내부 자유도 좌표 부분공간 ⊆ 트레이스 커널 (포함관계만 판정)

    커널 차원 초과분은 INFO, k=0 격자 영역은 예측값 2·경계성분수와 비교
    """
    tol = tol or DEFAULT_TOLERANCES
    meta = pair.meta or {}
    interior = meta.get("interior") or {}
    records: List[CheckRecord] = []
    for k, ts in sorted(traces.items()):
        entry = interior.get(str(k))
        if entry is None:
            continue
        B = ts.B
        scale = float(np.abs(B).max()) if B.size else 0.0
        for side, key in ((PRIMAL, "D"), (DUAL, "Dt")):
            idx = np.asarray(entry.get(key, []), dtype=np.int64)
            rows = B[idx, :] if side == PRIMAL else B[:, idx].T
            value = float(np.abs(rows).max()) / scale if rows.size and scale > 0 else 0.0
            records.append(gate(f"interior_kernel.{side}", value, tol.exact, k, "trace", dofs=int(idx.size)))
            kernel = ts.kernel(side)
            excess = kernel.dim - int(idx.size)
            detail = {"kernel": kernel.dim, "interior": int(idx.size)}
            expected = expected_kernel_excess(meta, k, side)
            if expected is not None:
                detail.update(expected=expected, matches=excess == expected)
            records.append(info(f"kernel_excess.{side}", float(excess), k, "trace", **detail))
    return records


def green_checks(pair: ComplexPair, mesh: TetMesh, tol: Optional[Tolerances] = None,
                 samples: int = GREEN_SAMPLES) -> List[CheckRecord]:
    """b_k(x, y) 와 경계 적분의 일치 (k = 0, 1, 2)"""
    tol = tol or DEFAULT_TOLERANCES
    feec = FeecSpaces(mesh)
    quad = boundary_quadrature(mesh)
    records: List[CheckRecord] = []
    for k in (0, 1, 2):
        level = pair.level(k)
        if level is None:
            continue
        rng = np.random.default_rng(tol.seed + 100 + k)
        B = level.pairing.matrix
        worst, biggest = 0.0, 0.0
        for _ in range(samples):
            x = rng.standard_normal(level.D.dim)
            y = rng.standard_normal(level.Dt.dim)
            volume = float(x @ B @ y)
            boundary = green_boundary_form(feec, k, x, y, quad)
            worst = max(worst, abs(volume - boundary))
            biggest = max(biggest, abs(volume), abs(boundary))
        value = worst / biggest if biggest > 0 else worst
        records.append(gate("green_formula", value, tol.residual, k, "derham", samples=samples))
    return records


def topology_checks(pair: ComplexPair, mesh: TetMesh, trace_dims: List[int]) -> List[CheckRecord]:
    """메쉬 Euler 지표, 경계 복합체 정확성, Smith 표준형 Betti 수와 트레이스 코호몰로지 비교"""
    bc = boundary_complex(mesh)
    betti = smith_betti(bc)
    records = [
        expect("euler", mesh.euler == EXPECTED_EULER[mesh.domain], None, "derham",
               value=mesh.euler, expected=EXPECTED_EULER[mesh.domain], domain=mesh.domain),
        gate("boundary_complex.exact", float(bc.exactness_residual()), 0.0, None, "derham"),
        expect("cohomology.smith", list(betti.betti) == list(trace_dims), None, "trace-complex",
               smith=list(betti.betti), trace=list(trace_dims), torsion=list(betti.torsion)),
    ]
    return records


def regular_checks(pair: ComplexPair, traces: Dict[int, TraceSystem], sops: Dict,
                   bases: RegularBases, tol: Tolerances) -> List[CheckRecord]:
    """정칙 분해, 확장 표면 연산자, 쌍대/치역 특성화, 트레이스 분해"""
    records: List[CheckRecord] = []
    for (side, k) in sorted(bases):
        basis_a, basis_b = bases[(side, k)]
        try:
            reg = build_regular(pair, k, basis_a, basis_b, side=side, tol=tol)
        except NoDecompositionError as e:
            records.append(expect(f"regular.{side}.decomposition", False, k, "regular", error=str(e)))
            continue
        records.extend(decomposition_records(reg, tol))

        ext = extend_surface_op(sops.get(k), reg, tol=tol)
        records.append(gate(f"extension.{side}.consistency", ext.consistency, tol.residual, k, "regular"))
        records.append(info(f"extension.{side}.continuity", ext.continuity, k, "regular",
                            domain_dim=int(ext.Z.shape[1])))

        _, dual_records = check_dual_characterization(pair, reg, tol=tol)
        records.extend(dual_records)
        _, range_records = check_range_characterization(traces, reg, tol=tol, sops=sops)
        records.extend(range_records)

        if side == DUAL and k + 1 in traces and traces[k + 1].Q_primal.dim:
            ts = traces[k + 1]
            rng = np.random.default_rng(tol.seed + 200 + k)
            x = ts.Q_primal.complement_basis @ rng.standard_normal(ts.Q_primal.dim)
            try:
                split = decompose_trace(pair, traces, reg, trace_apply(ts, PRIMAL, x), tol)
                records.append(gate("trace_decomposition", split.residual, tol.residual, k + 1, "regular"))
            except NotInRangeError as e:
                records.append(expect("trace_decomposition", False, k + 1, "regular", error=str(e)))
    return records


# ─── Battery ────────────────────────────────────────────────────────────────

def run_battery(pair: ComplexPair, tol: Optional[Tolerances] = None,
                regular: Optional[RegularBases] = None,
                on_block: Optional[Callable[[str], None]] = None) -> BatteryResult:
    """
    전체 검증

    Args:
        pair: 복합체 쌍
        tol: 허용오차 (표본 수와 시드 포함)
        regular: (side, k) → (basis_a, basis_b) 정칙 부분공간 기저, 없으면 정칙 블록 생략
        on_block: 블록 시작마다 호출 (CLI 상태 출력용)

    Returns:
        BatteryResult
    """
    tol = tol or DEFAULT_TOLERANCES
    notify = on_block or (lambda name: None)
    result = BatteryResult()

    notify("complex-pair")
    with _timed(result, "complex-pair") as out:
        out.extend(validate(pair, tol).records)

    notify("traces")
    with _timed(result, "traces") as out:
        traces = {k: assemble_trace(pair, k, tol) for k in pair.indices()}
        for k, ts in traces.items():
            out.extend(trace_identities(ts, tol.samples, tol.seed + k))
            out.extend(check_range_annihilator(ts, tol))
            out.extend(perp_identity_diagnostics(ts))
            out.extend(riesz_identity_diagnostics(ts))
            out.extend(harmonic_extension_diagnostics(ts, tol.seed + k))
        out.extend(interior_checks(pair, traces, tol))

    notify("surface")
    with _timed(result, "surface") as out:
        # 실패한 단계만 기록하고 나머지 단계는 계속 검사
        sops, failures = build_levels(pair, traces, tol)
        for k, error in sorted(failures.items()):
            out.append(expect("well_defined", False, k, "surface", error=str(error)))
        for k, ops in sorted(sops.items()):
            out.extend(check_commuting(pair, traces, ops, k, tol))

    notify("trace-complex")
    with _timed(result, "trace-complex") as out:
        missing = [k for k in trace_levels(traces)[:-1] if k not in sops]
        if missing:
            out.append(expect("trace_complex.levels", False, None, "trace-complex", missing=missing))
        elif sops:
            records, dims = check_trace_complex(pair, traces, sops, tol)
            out.extend(records)
            result.cohomology.update(dims)
        result.cohomology["domain"] = cohomology_dims(domain_complex(pair, tol), tol).dims
        result.cohomology["bc"] = cohomology_dims(bc_complex(pair, traces, tol), tol).dims

    mesh = mesh_for(pair)
    if mesh is not None:
        notify("derham")
        with _timed(result, "derham") as out:
            out.extend(green_checks(pair, mesh, tol))
            if "trace" in result.cohomology:
                out.extend(topology_checks(pair, mesh, result.cohomology["trace"]))

    if regular:
        notify("regular")
        with _timed(result, "regular") as out:
            out.extend(regular_checks(pair, traces, sops, regular, tol))

    result.records.append(info("compactness", None, None, "trace-complex",
                               note="finite-dimensional models: every bounded map is compact"))
    return result
