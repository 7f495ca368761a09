"""
오류 및 경고 정의
툴킷 전체에서 공유하는 예외 계층
"""

from typing import Optional


class TraceToolkitError(Exception):
    """툴킷 공통 기본 예외 (level 정보를 메시지에 포함)"""

    def __init__(self, message: str, level: Optional[int] = None):
        self.level = level
        if level is not None:
            message = f"[level {level}] {message}"
        super().__init__(message)


class ConfigurationError(TraceToolkitError, ValueError):
    """잘못된 허용오차 또는 SPD가 아닌 Gram 행렬"""


class StructureError(TraceToolkitError, ValueError):
    """차원 불일치 등 구조적 오류"""


class NotInDomainError(TraceToolkitError):
    """A_k x 가 다음 단계의 정의역 모델로 들어 올려지지 않음"""


class NotInRangeError(TraceToolkitError):
    """범함수가 트레이스 치역 밖의 성분을 가짐"""


class WellDefinednessViolation(TraceToolkitError):
    """커널이 다음 커널로 보내지지 않아 몫 연산자가 정의되지 않음"""


class NoDecompositionError(TraceToolkitError):
    """주어진 정칙 부분공간으로 분해가 존재하지 않음"""


class SpanningFailure(TraceToolkitError):
    """교집합 공간이 커널을 생성하지 못함 (밀집성 가정의 유한차원 판본 실패)"""


class SchemaError(TraceToolkitError, ValueError):
    """인스턴스/보고서 파일의 스키마 오류"""


class ChecksumError(TraceToolkitError):
    """저장 파일 체크섬 불일치"""


class MeshError(TraceToolkitError, ValueError):
    """잘못된 메시 인자, 퇴화 사면체, 비다양체 경계"""


class RankInstabilityWarning(UserWarning):
    """특이값이 계수 임계값 주변 불안정 구간에 있음"""
