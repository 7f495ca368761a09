"""
E2E test configuration: runs main.py in a subprocess.
Each test works in its own temporary directory.
"""
import os
import subprocess
import sys

import pytest

PROJECT_ROOT = os.path.normpath(os.path.join(os.path.dirname(__file__), '..', '..'))
MAIN = os.path.join(PROJECT_ROOT, "main.py")


@pytest.fixture
def run_cli(tmp_path):
    """Run the CLI with the given arguments, return the CompletedProcess."""
    def _run(*args, timeout=600):
        return subprocess.run(
            [sys.executable, MAIN, "--quiet", *[str(a) for a in args]],
            cwd=str(tmp_path),
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    return _run
