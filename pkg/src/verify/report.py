"""
검증 보고서 모듈
"trace-report/v1" JSON 문서 생성, 저장, 구조 검사
"""

import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from src.core.checks import FAIL, INFO, PASS, CheckRecord
from src.core.errors import SchemaError

REPORT_SCHEMA = "trace-report/v1"
TOOL_NAME = "hilbert-trace"
TOOL_VERSION = "1.0.0"

# 보고서 instance 블록에 넣지 않는 메타 키 (크기가 큰 자유도 목록)
BULKY_META_KEYS = ("interior",)


def _schema_path() -> str:
    return os.path.join(os.path.dirname(__file__), '..', '..', 'data', 'trace-report.schema.json')


def load_report_schema() -> Dict:
    """data/trace-report.schema.json (없으면 SchemaError)"""
    path = _schema_path()
    if not os.path.exists(path):
        raise SchemaError(f"report schema not found at {os.path.normpath(path)}")
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def instance_summary(label: str, checksum: Optional[str], meta: Optional[Dict]) -> Dict:
    meta = {k: v for k, v in sorted((meta or {}).items()) if k not in BULKY_META_KEYS}
    return {"label": label, "checksum": checksum, "meta": meta}


@dataclass
class Report:
    """
    검증 보고서

    verdict 는 모든 게이트 항목이 PASS 일 때만 PASS (INFO 는 판정에 쓰지 않음).
    timings 는 payload 에 들어가지 않는다.
    """
    command: str
    instance: Dict
    config: Dict
    records: List[CheckRecord] = field(default_factory=list)
    cohomology: Dict[str, List[int]] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def sorted_records(self) -> List[CheckRecord]:
        return sorted(self.records, key=CheckRecord.sort_key)

    @property
    def verdict(self) -> str:
        return PASS if all(r.passed for r in self.records) else FAIL

    @property
    def counts(self) -> Dict[str, int]:
        out = {PASS: 0, FAIL: 0, INFO: 0}
        for r in self.records:
            out[r.status] += 1
        return out

    def failed(self) -> List[CheckRecord]:
        return [r for r in self.sorted_records if not r.passed]

    def payload(self) -> Dict:
        """시간 정보를 뺀 결정적 본문"""
        return {
            "schema": REPORT_SCHEMA,
            "tool": {"name": TOOL_NAME, "version": TOOL_VERSION},
            "command": self.command,
            "instance": self.instance,
            "config": self.config,
            "seed": self.config.get("seed"),
            "samples": self.config.get("samples"),
            "records": [r.to_dict(with_timing=False) for r in self.sorted_records],
            "cohomology": {k: list(v) for k, v in sorted(self.cohomology.items())},
            "counts": self.counts,
            "verdict": self.verdict,
        }

    def to_document(self) -> Dict:
        document = self.payload()
        document["timings"] = {
            "blocks": {k: round(v, 6) for k, v in sorted(self.timings.items())},
            "records": [round(r.seconds, 6) for r in self.sorted_records],
        }
        return document

    def summary_line(self) -> str:
        c = self.counts
        return f"{self.verdict} ({c[PASS]} pass, {c[FAIL]} fail, {c[INFO]} info) {self.instance.get('label', '')}"


def payload_of(document: Dict) -> Dict:
    """저장된 보고서 문서에서 timings 를 뺀 부분"""
    return {k: v for k, v in document.items() if k != "timings"}


def check_report_document(document: Dict) -> None:
    """
    스키마 파일의 required 목록으로 구조 검사

    Raises:
        SchemaError: 필드 누락, 알 수 없는 스키마, 상태 값 오류
    """
    schema = load_report_schema()
    if document.get("schema") != REPORT_SCHEMA:
        raise SchemaError(f"report schema is {document.get('schema')!r}, expected {REPORT_SCHEMA!r}")
    missing = [k for k in schema.get("required", []) if k not in document]
    if missing:
        raise SchemaError(f"report is missing fields {missing}")
    record_schema = schema["properties"]["records"]["items"]
    statuses = set(record_schema["properties"]["status"]["enum"])
    for i, record in enumerate(document["records"]):
        absent = [k for k in record_schema.get("required", []) if k not in record]
        if absent:
            raise SchemaError(f"record {i} is missing fields {absent}")
        if record["status"] not in statuses:
            raise SchemaError(f"record {i} has status {record['status']!r}")
        if not isinstance(record["paper_ref"], str) or not record["paper_ref"]:
            raise SchemaError(f"record {i} ({record['name']}) has no paper_ref")
    if document["verdict"] not in (PASS, FAIL):
        raise SchemaError(f"verdict is {document['verdict']!r}")


def write_report(report: Report, path: str) -> Dict:
    """보고서 저장 (들여쓰기 2, 키 정렬). 저장한 문서를 반환"""
    document = report.to_document()
    check_report_document(document)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return document


def read_report(path: str) -> Dict:
    with open(path, 'r', encoding='utf-8') as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path} is not valid JSON: {e}")
    check_report_document(document)
    return document
