"""
인스턴스 파일 입출력
"hilbert-complex/v1" JSON 컨테이너 (행렬은 little-endian float64 base64, sha256 체크섬)
"""

import base64
import hashlib
import json
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.core.complex_pair import ComplexLevel, ComplexPair
from src.core.errors import ChecksumError, ConfigurationError, SchemaError
from src.core.linalg import InnerProductSpace

SCHEMA = "hilbert-complex/v1"
REGULAR_SCHEMA = "hilbert-regular/v1"
DTYPE = "<f8"
INDEX_DTYPE = "<i4"
SPARSE_MIN_SIZE = 4096


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def _sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr).tobytes(order="C")).decode("ascii")


def _unb64(text: str, dtype: str, count: int, where: str) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    width = np.dtype(dtype).itemsize
    if len(raw) != width * count:
        raise SchemaError(f"{where}: payload has {len(raw)} bytes, expected {width * count}")
    return np.frombuffer(raw, dtype=dtype)


def encode_matrix(mat) -> Dict:
    """
    행 우선 little-endian float64 → base64

    큰 희소 행렬(0 아닌 원소 ≤ 10%)은 COO 형식 (row/col int32, data float64)
    """
    arr = np.ascontiguousarray(np.asarray(mat, dtype=DTYPE))
    if arr.ndim != 2:
        raise SchemaError(f"only 2-D matrices are stored, got shape {arr.shape}")
    shape = [int(arr.shape[0]), int(arr.shape[1])]
    if arr.size >= SPARSE_MIN_SIZE:
        coo = sp.coo_matrix(arr)
        if coo.nnz * 10 <= arr.size:
            return {
                "shape": shape,
                "dtype": DTYPE,
                "format": "coo",
                "row": _b64(coo.row.astype(INDEX_DTYPE)),
                "col": _b64(coo.col.astype(INDEX_DTYPE)),
                "data": _b64(coo.data.astype(DTYPE)),
            }
    return {"shape": shape, "dtype": DTYPE, "data": _b64(arr)}


def decode_matrix(payload: Dict, where: str = "matrix") -> np.ndarray:
    try:
        shape = tuple(int(s) for s in payload["shape"])
        dtype = payload["dtype"]
        fmt = payload.get("format", "dense")
        if dtype != DTYPE or len(shape) != 2:
            raise SchemaError(f"{where}: unsupported dtype {dtype!r} or shape {shape}")
        if fmt == "dense":
            flat = _unb64(payload["data"], DTYPE, shape[0] * shape[1], where)
            return flat.reshape(shape).astype(float)
        if fmt == "coo":
            data = payload["data"]
            nnz = len(base64.b64decode(data.encode("ascii"), validate=True)) // 8
            values = _unb64(data, DTYPE, nnz, where)
            rows = _unb64(payload["row"], INDEX_DTYPE, nnz, where)
            cols = _unb64(payload["col"], INDEX_DTYPE, nnz, where)
            if nnz and (rows.max() >= shape[0] or cols.max() >= shape[1] or min(rows.min(), cols.min()) < 0):
                raise SchemaError(f"{where}: sparse index out of range for shape {shape}")
            return sp.coo_matrix((values, (rows, cols)), shape=shape).toarray()
        raise SchemaError(f"{where}: unknown matrix format {fmt!r}")
    except SchemaError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SchemaError(f"{where}: malformed matrix payload ({e})")


def _seal(document: Dict) -> Dict:
    body = {k: v for k, v in document.items() if k != "checksum"}
    sealed = dict(body)
    sealed["checksum"] = _sha256_hex(canonical_json(body))
    return sealed


def _read_sealed(path: str, schema: str) -> Dict:
    if not os.path.exists(path):
        raise SchemaError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path} is not valid JSON: {e}")
    if not isinstance(document, dict):
        raise SchemaError(f"{path}: top level must be an object")
    if document.get("schema") != schema:
        raise SchemaError(f"{path}: schema {document.get('schema')!r}, expected {schema!r}")
    stored = document.get("checksum")
    body = {k: v for k, v in document.items() if k != "checksum"}
    if stored != _sha256_hex(canonical_json(body)):
        raise ChecksumError(f"{path}: checksum mismatch")
    return body


def _write(path: str, document: Dict) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(document))
        f.write("\n")


# ─── Complex pairs ──────────────────────────────────────────────────────────

def pair_to_document(pair: ComplexPair) -> Dict:
    """
    W_k Gram 은 "spaces" 에 한 번씩, 단계별로는 D/Dt Gram 과 연산자만 저장
    """
    spaces = [{"k": lv.k, "gram": encode_matrix(lv.W.gram)} for lv in pair.levels]
    if pair.levels:
        last = pair.levels[-1]
        spaces.append({"k": last.k + 1, "gram": encode_matrix(last.W_next.gram)})
    levels = []
    for lv in pair.levels:
        entry = {
            "k": lv.k,
            "dims": {"W": lv.W.dim, "W_next": lv.W_next.dim, "D": lv.D.dim, "Dt": lv.Dt.dim},
            "grams": {
                "D": encode_matrix(lv.D.gram),
                "Dt": encode_matrix(lv.Dt.gram),
            },
            "inj_D": encode_matrix(lv.inj_D),
            "inj_Dt": encode_matrix(lv.inj_Dt),
            "A": encode_matrix(lv.A),
            "At": encode_matrix(lv.At),
        }
        if lv.lift_A is not None:
            entry["lift_A"] = encode_matrix(lv.lift_A)
        if lv.lift_At is not None:
            entry["lift_At"] = encode_matrix(lv.lift_At)
        levels.append(entry)
    return _seal({
        "schema": SCHEMA,
        "label": pair.label,
        "k_min": pair.k_min,
        "k_max": pair.k_max,
        "spaces": spaces,
        "levels": levels,
        "meta": pair.meta,
    })


def _space(level: int, name: str, gram: np.ndarray, dim: int) -> InnerProductSpace:
    if gram.shape != (dim, dim):
        raise SchemaError(f"gram {name} has shape {gram.shape}, dims say {dim}", level=level)
    try:
        space = InnerProductSpace(gram, name=f"{name}{level}")
        space.check_spd()
    except ConfigurationError as e:
        raise ConfigurationError(f"gram {name}: {e}", level=level)
    return space


def document_to_pair(document: Dict) -> ComplexPair:
    try:
        raw_levels = document["levels"]
        raw_spaces = document["spaces"]
        k_min, k_max = int(document["k_min"]), int(document["k_max"])
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"missing top-level field: {e}")
    if len(raw_levels) != max(k_max - k_min + 1, 0):
        raise SchemaError(f"{len(raw_levels)} levels stored for range [{k_min}, {k_max}]")
    if raw_levels and len(raw_spaces) != len(raw_levels) + 1:
        raise SchemaError(f"{len(raw_spaces)} W spaces stored for {len(raw_levels)} levels")

    grams_W: Dict[int, np.ndarray] = {}
    for entry in raw_spaces:
        try:
            j = int(entry["k"])
            grams_W[j] = decode_matrix(entry["gram"], f"space W{j}")
        except (KeyError, TypeError) as e:
            raise SchemaError(f"space entry is missing field {e}")

    W: Dict[int, InnerProductSpace] = {}
    levels: List[ComplexLevel] = []
    for entry in raw_levels:
        try:
            k = int(entry["k"])
            dims = entry["dims"]
            grams = {name: decode_matrix(entry["grams"][name], f"level {k} gram {name}")
                     for name in ("D", "Dt")}
            mats = {name: decode_matrix(entry[name], f"level {k} {name}")
                    for name in ("inj_D", "inj_Dt", "A", "At")}
            lifts = {name: decode_matrix(entry[name], f"level {k} {name}") if name in entry else None
                     for name in ("lift_A", "lift_At")}
        except (KeyError, TypeError) as e:
            raise SchemaError(f"level entry is missing field {e}")
        for j, key in ((k, "W"), (k + 1, "W_next")):
            if j not in grams_W:
                raise SchemaError(f"space W{j} is not stored", level=k)
            if j not in W:
                W[j] = _space(j, "W", grams_W[j], int(dims[key]))
            elif W[j].dim != int(dims[key]):
                raise SchemaError(f"dims say {key} has dim {dims[key]}, W{j} has {W[j].dim}", level=k)
        levels.append(ComplexLevel(
            k, W[k], W[k + 1],
            _space(k, "D", grams["D"], int(dims["D"])),
            _space(k, "Dt", grams["Dt"], int(dims["Dt"])),
            mats["inj_D"], mats["inj_Dt"], mats["A"], mats["At"],
            lifts["lift_A"], lifts["lift_At"],
        ))
    return ComplexPair(tuple(levels), label=str(document.get("label", "")),
                       meta=dict(document.get("meta") or {}))


def save(pair: ComplexPair, path: str) -> str:
    """
    복합체 쌍 저장

    Returns:
        체크섬 (sha256 hex)
    """
    document = pair_to_document(pair)
    _write(path, document)
    return document["checksum"]


def load(path: str) -> ComplexPair:
    """스키마/체크섬 확인 후 복합체 쌍 로드"""
    return document_to_pair(_read_sealed(path, SCHEMA))


# ─── Regular subspace blocks ────────────────────────────────────────────────

RegularBases = Dict[Tuple[str, int], Tuple[np.ndarray, np.ndarray]]


def save_regular(bases: RegularBases, path: str, label: str = "") -> str:
    """
    정칙 부분공간 기저 블록 저장

    Args:
        bases: (side, k) → (basis_a, basis_b), side 는 "primal" 또는 "dual"
    """
    entries = []
    for (side, k) in sorted(bases):
        basis_a, basis_b = bases[(side, k)]
        entries.append({"side": side, "k": int(k),
                        "basis_a": encode_matrix(basis_a), "basis_b": encode_matrix(basis_b)})
    document = _seal({"schema": REGULAR_SCHEMA, "label": label, "levels": entries})
    _write(path, document)
    return document["checksum"]


def load_regular(path: str) -> RegularBases:
    body = _read_sealed(path, REGULAR_SCHEMA)
    out: RegularBases = {}
    for entry in body.get("levels", []):
        try:
            side, k = entry["side"], int(entry["k"])
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"regular entry is missing field {e}")
        if side not in ("primal", "dual"):
            raise SchemaError(f"regular entry has side {side!r}", level=k)
        out[(side, k)] = (decode_matrix(entry["basis_a"], f"regular {side} {k} basis_a"),
                          decode_matrix(entry["basis_b"], f"regular {side} {k} basis_b"))
    return out


def file_checksum(path: str) -> Optional[str]:
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f).get("checksum")
        except (json.JSONDecodeError, AttributeError):
            return None
