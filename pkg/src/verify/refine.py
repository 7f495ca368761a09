"""
세분화 연구
메쉬를 세분화하며 고정 탐침 함수의 등거리 결손 비율과 트레이스 연산자 노름을 표로 기록
"""

import os
from typing import Callable, Iterable, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.core.checks import CheckRecord, expect, gate, info
from src.core.config import Tolerances
from src.core.errors import ConfigurationError
from src.core.linalg import DEFAULT_TOLERANCES
from src.fem.derham import build_complex_pair
from src.fem.feec import FeecSpaces, build_feec
from src.fem.mesh import build_mesh
from src.traces.trace_system import PRIMAL, assemble_trace, isometry_defect, trace_operator_norm

PROBES = ("coordinate-x", "coordinate-z", "constant-one")
COLUMNS = ["domain", "n", "level", "probe", "trace_norm", "quotient_norm", "ratio", "operator_norm"]
TOPIC = "refine"

# 탐침은 모두 일차식 f(p) = f0 + g·p, (f0, g)
_AFFINE_PROBES = {
    "coordinate-x": (0.0, np.array([1.0, 0.0, 0.0])),
    "coordinate-z": (0.0, np.array([0.0, 0.0, 1.0])),
    "constant-one": (1.0, np.zeros(3)),
}
_DIAGONAL = np.ones(3) / np.sqrt(3.0)


def parse_n_list(text: str) -> List[int]:
    """'1,2,3' → [1, 2, 3]"""
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError(f"n-list must be comma separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise ConfigurationError(f"n-list needs integers ≥ 1, got {text!r}")
    return values


def _affine(probe: str):
    if probe not in _AFFINE_PROBES:
        raise ConfigurationError(f"unknown probe {probe!r} (choose from {', '.join(PROBES)})")
    return _AFFINE_PROBES[probe]


def probe_function(probe: str) -> Callable[[np.ndarray], np.ndarray]:
    f0, g = _affine(probe)
    return lambda p: f0 + p @ g


def vector_field_of(probe: str, k: int) -> Callable[[np.ndarray], np.ndarray]:
    """
    k=1, 2 의 벡터 탐침

    k=1: f0·d + g × p (Nédélec 최저차 꼴 a + b × p), k=2: f0·d + g + (g·d) p (Raviart-Thomas 최저차 꼴 a + c p).
    d = (1,1,1)/√3. 모든 메쉬의 D_k 에 정확히 들어가므로 세분화마다 같은 함수를 잰다.
    """
    f0, g = _affine(probe)
    if k == 1:
        return lambda p: f0 * _DIAGONAL + np.cross(g, p)
    if k == 2:
        return lambda p: f0 * _DIAGONAL + g + (g @ _DIAGONAL) * p
    raise ConfigurationError(f"vector probes are defined for k = 1, 2, got {k}")


def probe_dofs(feec: FeecSpaces, k: int, probe: str) -> np.ndarray:
    """
    탐침 함수의 D_k 자유도

    k=0: 정점값, k=1: 모서리 적분 ∫ u·t, k=2: 면 플럭스 ∫ u·n.
    탐침이 일차식이므로 중점/무게중심 규칙이 정확하다
    """
    mesh = feec.mesh
    v = mesh.vertices
    if k == 0:
        return probe_function(probe)(v)
    if k == 1:
        u = vector_field_of(probe, 1)
        a, b = v[mesh.edges[:, 0]], v[mesh.edges[:, 1]]
        return np.einsum("ij,ij->i", u(0.5 * (a + b)), b - a)
    if k == 2:
        u = vector_field_of(probe, 2)
        a, b, c = (v[mesh.faces[:, i]] for i in range(3))
        area_normal = 0.5 * np.cross(b - a, c - a)
        return np.einsum("ij,ij->i", u((a + b + c) / 3.0), area_normal)
    _affine(probe)
    raise ConfigurationError(f"refinement probes are defined for k = 0, 1, 2, got {k}")


def refine_study(n_list: Iterable[int], probe: str, level: int = 0, domain: str = "cube",
                 tol: Optional[Tolerances] = None, progress: bool = False) -> pd.DataFrame:
    """
    n 마다 인스턴스를 만들어 탐침의 ‖T x‖'/‖[x]‖ 와 ‖T‖ 기록

    Returns:
        DataFrame (COLUMNS, n 순서)
    """
    tol = tol or DEFAULT_TOLERANCES
    probe_function(probe)
    rows = []
    for n in tqdm(list(n_list), desc=f"refine {probe}", disable=not progress, unit="mesh"):
        feec = build_feec(build_mesh(domain, n))
        pair = build_complex_pair(feec)
        ts = assemble_trace(pair, level, tol)
        defect = isometry_defect(ts, PRIMAL, probe_dofs(feec, level, probe), boundary=True)
        rows.append({
            "domain": domain,
            "n": int(n),
            "level": int(level),
            "probe": probe,
            "trace_norm": defect.trace_norm,
            "quotient_norm": defect.quotient_norm,
            "ratio": defect.ratio,
            "operator_norm": trace_operator_norm(ts, PRIMAL),
        })
    return pd.DataFrame(rows, columns=COLUMNS)


def check_refinement(frame: pd.DataFrame, tol: Optional[Tolerances] = None) -> List[CheckRecord]:
    """
    비율·노름 ≤ 1 (+exact) 판정과 비율의 단조 증가 (slack 이내)

    행이 하나면 단조성은 판정하지 않는다
    """
    tol = tol or DEFAULT_TOLERANCES
    if frame.empty:
        return [info("refine.rows", 0.0, None, TOPIC)]
    level = int(frame["level"].iloc[0])
    ratios = frame["ratio"].to_numpy(dtype=float)
    norms = frame["operator_norm"].to_numpy(dtype=float)
    records = [
        gate("refine.ratio_bound", max(float(ratios.max()) - 1.0, 0.0), tol.exact, level, TOPIC,
             ratios=ratios.tolist()),
        gate("refine.operator_norm_bound", max(float(norms.max()) - 1.0, 0.0), tol.exact, level, TOPIC,
             norms=norms.tolist()),
    ]
    if len(ratios) < 2:
        records.append(info("refine.monotone", None, level, TOPIC, rows=len(ratios)))
    else:
        drops = np.diff(ratios)
        worst = float(-drops.min()) if drops.min() < 0 else 0.0
        records.append(expect("refine.monotone", worst <= tol.monotone_slack, level, TOPIC,
                              value=worst, slack=tol.monotone_slack))
    return records


def write_table(frame: pd.DataFrame, path: str) -> None:
    """헤더가 있는 CSV (RFC-4180 인용)"""
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\r\n", float_format="%.17g")
