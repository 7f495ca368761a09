"""
허용오차 설정 모듈
data/tolerances.json 기본값 → .env / HTRACE_* 환경변수 → CLI 플래그 순으로 덮어쓴다
"""

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, List, Optional

from src.core.errors import ConfigurationError

try:
    from dotenv import load_dotenv
    load_dotenv(os.path.join(os.path.dirname(__file__), '..', '..', '.env'))
except ImportError:
    pass

ENV_PREFIX = "HTRACE_"


@dataclass(frozen=True)
class Tolerances:
    """수치 판정에 쓰이는 모든 임계값"""
    rank_factor: float = 1e3      # τ = max(m,n)·eps·σ_max·rank_factor
    band: float = 10.0            # [τ/band, τ·band] 는 불안정 구간
    residual: float = 1e-10
    exact: float = 1e-12
    spd_symmetry: float = 1e-12
    membership: float = 1e-9
    monotone_slack: float = 1e-6
    samples: int = 10000
    seed: int = 20240611

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "seed":
                if not isinstance(value, int) or value < 0:
                    raise ConfigurationError(f"seed must be a nonnegative integer, got {value!r}")
                continue
            if f.name == "samples":
                if not isinstance(value, int) or value < 1:
                    raise ConfigurationError(f"samples must be a positive integer, got {value!r}")
                continue
            if not value > 0:
                raise ConfigurationError(f"{f.name} must be positive, got {value!r}")
        if self.band <= 1.0:
            raise ConfigurationError(f"band must exceed 1, got {self.band}")

    def with_overrides(self, **overrides) -> "Tolerances":
        """None 이 아닌 값만 덮어쓴 새 인스턴스"""
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(clean) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigurationError(f"unknown tolerance fields: {sorted(unknown)}")
        return replace(self, **clean)

    def to_dict(self) -> Dict:
        return asdict(self)


def _candidate_paths() -> List[str]:
    here = os.path.dirname(__file__)
    return [
        os.path.join(here, '..', '..', 'data', 'tolerances.json'),
        os.path.join(os.getcwd(), 'data', 'tolerances.json'),
    ]


def _coerce(name: str, raw: str):
    try:
        if name in ("seed", "samples"):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a number")


def load_tolerances(path: Optional[str] = None, use_env: bool = True) -> Tolerances:
    """
    기본 허용오차 로드

    Args:
        path: JSON 설정 파일 (없으면 data/tolerances.json 후보 경로 탐색)
        use_env: HTRACE_* 환경변수 반영 여부

    Returns:
        Tolerances 인스턴스
    """
    if path is not None and not os.path.exists(path):
        raise ConfigurationError(f"tolerance file not found: {path}")

    values: Dict = {}
    candidates = [path] if path else _candidate_paths()
    for candidate in candidates:
        if os.path.exists(candidate):
            with open(candidate, 'r', encoding='utf-8') as f:
                try:
                    values.update(json.load(f))
                except json.JSONDecodeError as e:
                    raise ConfigurationError(f"cannot parse {candidate}: {e}")
            break

    if use_env:
        for f in fields(Tolerances):
            raw = os.getenv(ENV_PREFIX + f.name.upper())
            if raw is not None and raw != "":
                values[f.name] = _coerce(f.name, raw)

    known = {f.name for f in fields(Tolerances)}
    unknown = set(values) - known
    if unknown:
        raise ConfigurationError(f"unknown tolerance fields: {sorted(unknown)}")
    for name in ("seed", "samples"):
        if name in values and isinstance(values[name], float) and values[name].is_integer():
            values[name] = int(values[name])
    return Tolerances(**values)
