"""
합성 복합체 쌍 생성기
시드 고정 난수로 복합체 성질과 쌍대 복합체 성질을 만족하는 작은 인스턴스를 만든다
"""

from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from src.core.complex_pair import ComplexLevel, ComplexPair
from src.core.errors import StructureError
from src.core.linalg import InnerProductSpace


def _random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0))
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    g = q @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ q.T
    return 0.5 * (g + g.T)


def _random_injection(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    if cols == 0:
        return np.zeros((rows, 0))
    # 직교 열 + 잘 조건화된 혼합
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    mix = np.eye(cols) + 0.3 * rng.standard_normal((cols, cols)) / np.sqrt(cols)
    return q @ mix


def chain_maps(rng: np.random.Generator, dims: List[int], ranks: List[int]) -> List[np.ndarray]:
    """
    f_{i+1}∘f_i = 0 인 사상열 f_i : R^{dims[i]} → R^{dims[i+1]}

    Args:
        dims: 공간 차원 (길이 m+1)
        ranks: 사상 계수 (길이 m), ranks[i] + ranks[i+1] ≤ dims[i+1]
    """
    maps = []
    forbidden: Optional[np.ndarray] = None   # 이전 사상의 치역 (소멸시켜야 함)
    for i, r in enumerate(ranks):
        src, dst = dims[i], dims[i + 1]
        if r == 0 or src == 0 or dst == 0:
            maps.append(np.zeros((dst, src)))
            forbidden = None
            continue
        if forbidden is not None and forbidden.shape[1]:
            allowed = sla.null_space(forbidden.T)
        else:
            allowed = np.eye(src)
        r = min(r, allowed.shape[1], dst)
        y = allowed @ rng.standard_normal((allowed.shape[1], r))
        x = rng.standard_normal((dst, r))
        f = x @ y.T
        maps.append(f)
        forbidden = x
    return maps


def _ranks(rng: np.random.Generator, dims: List[int]) -> List[int]:
    ranks = []
    prev = 0
    for i in range(len(dims) - 1):
        cap = min(dims[i] - prev, dims[i + 1])
        r = int(rng.integers(0, max(cap, 0) + 1)) if cap > 0 else 0
        # 다음 사상이 들어갈 자리를 남김
        r = min(r, max(dims[i + 1] - 1, 0))
        ranks.append(r)
        prev = r
    return ranks


def _check_chain(maps: List[np.ndarray], which: str) -> None:
    for i, (first, second) in enumerate(zip(maps, maps[1:])):
        if not first.size or not second.size:
            continue
        scale = max(np.linalg.norm(first) * np.linalg.norm(second), 1.0)
        residual = np.linalg.norm(second @ first) / scale
        if residual > 1e-12:
            raise StructureError(f"{which} chain map {i + 1}∘{i} is not zero (residual {residual:.3e})")


def random_pair(seed: int, levels: int = 3, max_dim: int = 12,
                identity_inclusions: bool = False, label: str = "") -> ComplexPair:
    """
    시드 고정 합성 복합체 쌍

    Args:
        seed: 난수 시드
        levels: 단계 수 (k = 0 .. levels-1)
        max_dim: 정의역 모델의 최대 차원
        identity_inclusions: True 면 D_k = W_k, Dt_k = W_{k+1} (포함사상 = 단위행렬)

    Returns:
        ComplexPair (meta 에 생성 매개변수 기록)
    """
    rng = np.random.default_rng(seed)
    n = levels
    if identity_inclusions:
        w = [int(rng.integers(2, max_dim + 1)) for _ in range(n + 1)]
        d = w[:n]
        dt = w[1:]
    else:
        d = [int(rng.integers(2, max_dim + 1)) for _ in range(n)]
        dt = [int(rng.integers(2, max_dim + 1)) for _ in range(n)]
        # W_k 는 D_k 와 Dt_{k-1} 을 모두 담아야 함
        w = []
        for k in range(n + 1):
            need = max(d[k] if k < n else 0, dt[k - 1] if k >= 1 else 0)
            w.append(need + int(rng.integers(0, 3)))

    W = [InnerProductSpace(_random_spd(rng, w[k]), name=f"W{k}") for k in range(n + 1)]
    if identity_inclusions:
        inj_D = [np.eye(w[k]) for k in range(n)]
        inj_Dt = [np.eye(w[k + 1]) for k in range(n)]
    else:
        inj_D = [_random_injection(rng, w[k], d[k]) for k in range(n)]
        inj_Dt = [_random_injection(rng, w[k + 1], dt[k]) for k in range(n)]

    # 주 사슬: D_0 → D_1 → … → D_{n-1} → W_n
    primal = chain_maps(rng, d + [w[n]], _ranks(rng, d + [w[n]]))
    A = [inj_D[k + 1] @ primal[k] for k in range(n - 1)] + [primal[n - 1]]

    # 쌍대 사슬: Dt_{n-1} → … → Dt_0 → W_0
    rev_dims = dt[::-1] + [w[0]]
    dual = chain_maps(rng, rev_dims, _ranks(rng, rev_dims))[::-1]
    # dual[k] : Dt_k → Dt_{k-1} (k ≥ 1), dual[0] : Dt_0 → W_0
    At = [dual[0]] + [inj_Dt[k - 1] @ dual[k] for k in range(1, n)]
    # 두 사슬 성질이 있으면 A_k 는 트레이스 커널을 다음 커널로 보낸다
    _check_chain(primal, "primal")
    _check_chain(dual[::-1], "dual")

    built = tuple(
        ComplexLevel.from_operators(k, W[k], W[k + 1], inj_D[k], inj_Dt[k], A[k], At[k])
        for k in range(n)
    )
    meta = {
        "generator": "synthetic",
        "seed": int(seed),
        "levels": n,
        "max_dim": max_dim,
        "identity_inclusions": bool(identity_inclusions),
    }
    return ComplexPair(built, label=label or f"synthetic-{seed}", meta=meta)


def zero_pair(levels: int = 3) -> ComplexPair:
    """모든 공간이 {0} 인 복합체 쌍"""
    empty = InnerProductSpace(np.zeros((0, 0)), name="zero")
    z = np.zeros((0, 0))
    built = tuple(ComplexLevel.from_operators(k, empty, empty, z, z, z, z) for k in range(levels))
    return ComplexPair(built, label="zero", meta={"generator": "zero", "levels": levels})
