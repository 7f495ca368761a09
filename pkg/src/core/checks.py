"""
검증 항목 기록 타입
각 검사는 이름, 단계, 상태(PASS/FAIL/INFO), 값, 허용오차를 남긴다
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

PASS = "PASS"
FAIL = "FAIL"
INFO = "INFO"

# 검사 이름 (또는 점으로 끊은 접두사) → 그 검사가 확인하는 이론적 명제
REFERENCES: Dict[str, str] = {
    "graph_gram": "graph inner product (x,y)_W + (Ax,Ay)_W on D(A_k) and D(A^T_k)",
    "complex_property": "Hilbert complex: R(A_k) in D(A_{k+1}) and A_{k+1} A_k = 0",
    "dual_complex_property": "adjoint complex: A^T_{k-1} A^T_k = 0",
    "range_lift": "R(A_k) is contained in D(A_{k+1})",
    "range_lift_dual": "R(A^T_k) is contained in D(A^T_{k-1})",
    "pairing_bound": "boundedness of b_k(x,y) = (A x, y) - (x, A^T y) in graph norms",
    "pairing_norm": "boundedness of b_k(x,y) = (A x, y) - (x, A^T y) in graph norms",
    "kernel": "D(Å_k) lies in N(T^t_k), D(A*_k) lies in N(T^n_k)",
    "quotient": "trace spaces are quotients of the graph spaces by the trace kernels",
    "quotient_map": "quotient map onto the trace space is a metric surjection",
    "range_annihilator": "closed range of the trace: R(T^t_k) is the annihilator of N(T^n_k)",
    "trace": "dual trace: <T^n y, x> = -<T^t x, y>",
    "trace_bound": "primal and dual traces have operator norm at most one",
    "isometry_ratio": "the trace norm equals the quotient norm on the trace space",
    "integration_by_parts": "Green formula: <T^t x, y> = (A x, y) - (x, A^T y)",
    "duality": "the trace spaces are in duality through b_k with a norm-one isomorphism K_k",
    "rank": "numerical rank decision for the trace matrix",
    "perp_identity": "harmonic representative of D(Å_k)-perp realises the quotient norm",
    "perp_isometry": "harmonic representative of D(Å_k)-perp realises the quotient norm",
    "riesz_identity": "Riesz representative computes the dual norm of a trace",
    "harmonic_extension": "minimal-norm extension solves the homogeneous boundary value problem",
    "interior_kernel": "coordinate model of D(Å_k) lies in the trace kernel",
    "kernel_excess": "discrete trace kernel against the interior-DOF model of D(Å_k)",
    "commuting": "surface operators commute with the traces",
    "commuting.i": "-D^t_k T^t_k = T^t_{k+1} A_k",
    "commuting.ii": "-D^n_{k+1} T^n_{k+1} = T^n_k A^T_{k+1}",
    "commuting.iii": "<S^t [x], [z]> = -<[x], S^n [z]> under the trace duality",
    "commuting.iv": "K_{k+1} S^t_k = -(S^n_{k+1})' K_k",
    "key_containment": "D^t_k maps R(T^t_k) into R(T^t_{k+1})",
    "well_defined": "A_k maps the trace kernel and D(Å_k) into their next-level counterparts",
    "complex": "surface operators form bounded complexes",
    "cohomology": "trace complex cohomology of the boundary",
    "compactness": "compactness of the trace complex in finite dimensions",
    "green_formula": "b_k equals the boundary integral of the traces (de Rham Green formula)",
    "boundary_complex": "boundary surface cell complex is exact at the chain level",
    "euler": "Euler characteristic of the mesh",
    "refine": "the trace norm is approached from below under mesh refinement",
    "regular": "regular decomposition of the graph space",
    "extension": "extension of the surface operator to regular traces",
    "dual_characterization": "regular dual trace space as dual of the regular trace space",
    "range_characterization": "range of the regular trace as intersection with the regular subspace",
    "trace_decomposition": "regular decomposition of a trace",
    "trace_complex": "surface operators exist at every level of the trace complex",
}


def reference_for(name: str) -> str:
    """이름을 끝에서부터 줄여가며 REFERENCES 에서 찾는다 (없으면 이름 자체)"""
    parts = name.split(".")
    while parts:
        ref = REFERENCES.get(".".join(parts))
        if ref:
            return ref
        parts.pop()
    return name


@dataclass
class CheckRecord:
    """검증 결과 한 건"""
    name: str
    status: str
    value: Optional[float] = None
    tolerance: Optional[float] = None
    level: Optional[int] = None
    topic: str = ""
    detail: Dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0
    paper_ref: str = ""

    def __post_init__(self):
        if not self.paper_ref:
            self.paper_ref = reference_for(self.name)

    @property
    def gating(self) -> bool:
        return self.status != INFO

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def sort_key(self):
        level = self.level if self.level is not None else -10**9
        return (level, self.name)

    def to_dict(self, with_timing: bool = True) -> Dict[str, Any]:
        out = {
            "name": self.name,
            "level": self.level,
            "topic": self.topic,
            "status": self.status,
            "value": _clean(self.value),
            "tolerance": _clean(self.tolerance),
            "detail": {k: _clean(v) for k, v in sorted(self.detail.items())},
            "paper_ref": self.paper_ref,
        }
        if with_timing:
            out["seconds"] = round(self.seconds, 6)
        return out


def _clean(value):
    """JSON 직렬화용 값 정리 (numpy 스칼라, inf/nan)"""
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def gate(name: str, value: float, tolerance: float, level: Optional[int] = None,
         topic: str = "", ref: str = "", **detail) -> CheckRecord:
    """value ≤ tolerance 이면 PASS (ref 가 비면 REFERENCES 에서 찾음)"""
    status = PASS if value <= tolerance else FAIL
    return CheckRecord(name, status, float(value), float(tolerance), level, topic, dict(detail), paper_ref=ref)


def expect(name: str, ok: bool, level: Optional[int] = None, topic: str = "",
           value: Optional[float] = None, ref: str = "", **detail) -> CheckRecord:
    """불리언 조건 검사"""
    return CheckRecord(name, PASS if ok else FAIL, value, None, level, topic, dict(detail), paper_ref=ref)


def info(name: str, value: Optional[float] = None, level: Optional[int] = None,
         topic: str = "", ref: str = "", **detail) -> CheckRecord:
    """판정에 영향을 주지 않는 정보 항목"""
    return CheckRecord(name, INFO, None if value is None else float(value), None, level, topic, dict(detail),
                       paper_ref=ref)


def all_passed(records: List[CheckRecord]) -> bool:
    return all(r.passed for r in records)
