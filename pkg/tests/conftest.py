"""
Shared fixtures: small de Rham instances and synthetic pairs, built once per session.
"""
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.core.config import Tolerances
from src.core.synthetic import random_pair
from src.fem.derham import build_complex_pair
from src.fem.feec import build_feec
from src.fem.mesh import build_mesh
from src.traces.surface_ops import build_all
from src.traces.trace_system import assemble_trace


@pytest.fixture(scope="session")
def tol():
    """Default tolerances with a reduced sample count for fast tests."""
    return Tolerances(samples=400)


@pytest.fixture(scope="session")
def tet_feec():
    return build_feec(build_mesh("tet", 1))


@pytest.fixture(scope="session")
def cube1_feec():
    return build_feec(build_mesh("cube", 1))


@pytest.fixture(scope="session")
def cube2_feec():
    return build_feec(build_mesh("cube", 2))


@pytest.fixture(scope="session")
def tet_pair(tet_feec):
    return build_complex_pair(tet_feec)


@pytest.fixture(scope="session")
def cube1_pair(cube1_feec):
    return build_complex_pair(cube1_feec)


@pytest.fixture(scope="session")
def cube2_pair(cube2_feec):
    return build_complex_pair(cube2_feec)


@pytest.fixture(scope="session")
def cube1_traces(cube1_pair, tol):
    return {k: assemble_trace(cube1_pair, k, tol) for k in cube1_pair.indices()}


@pytest.fixture(scope="session")
def cube1_sops(cube1_pair, cube1_traces, tol):
    return build_all(cube1_pair, cube1_traces, tol)


@pytest.fixture(scope="session")
def tet_traces(tet_pair, tol):
    return {k: assemble_trace(tet_pair, k, tol) for k in tet_pair.indices()}


@pytest.fixture(scope="session")
def tet_sops(tet_pair, tet_traces, tol):
    return build_all(tet_pair, tet_traces, tol)


@pytest.fixture(scope="session")
def synthetic_pair():
    return random_pair(7, levels=3, max_dim=8)


@pytest.fixture(scope="session")
def synthetic_traces(synthetic_pair, tol):
    return {k: assemble_trace(synthetic_pair, k, tol) for k in synthetic_pair.indices()}
