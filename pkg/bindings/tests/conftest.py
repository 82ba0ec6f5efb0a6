import subprocess
import sys

import pytest


def run_cli(*args):
    """Invoke the core CLI as a subprocess, failing loudly on error."""
    proc = subprocess.run(
        [sys.executable, "-m", "pless", *map(str, args)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.fixture(scope="session")
def phantom_dirs(tmp_path_factory):
    """Ten phantom cases written by the CLI itself."""
    root = tmp_path_factory.mktemp("phantoms")
    dirs = []
    for seed in range(10):
        out = root / f"seed{seed}"
        run_cli("synth", "--seed", seed, "--out-dir", out)
        dirs.append(out)
    return dirs
