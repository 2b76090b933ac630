"""Reference trace bundle, produced through the simulator's public CLI."""

from __future__ import annotations

import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def trace_bundle(tmp_path_factory):
    """vslip and knee traces from short runs of the walker CLI."""
    d = tmp_path_factory.mktemp("bundle")
    run = lambda *args: subprocess.run(
        [sys.executable, "-m", "springwalker.cli", *args],
        check=True, capture_output=True, text=True,
    )
    run("find-cycle", "--out-dir", str(d))
    ref = str(d / "gait_reference.json")
    run("walk", "--model", "vslip", "--steps", "6", "--out-dir", str(d),
        "--reference", ref)
    run("walk", "--model", "knee", "--steps", "5", "--out-dir", str(d),
        "--reference", ref)
    return d
