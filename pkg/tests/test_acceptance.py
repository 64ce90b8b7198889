"""End-to-end acceptance run.

Runs ``dlab suite acceptance --seed 42 --check-determinism`` once: the suite
executes in two fresh processes (1 and 4 worker threads), criterion 12
compares their JSON bytes, and one line per criterion is printed.
"""

import json
import os
import subprocess
import sys

import pytest

pytestmark = pytest.mark.slow

SEED = 42


@pytest.fixture(scope="module")
def report():
    proc = subprocess.run(
        [sys.executable, "-m", "dlab.cli", "suite", "acceptance", "--seed", str(SEED), "--check-determinism"],
        capture_output=True,
        text=True,
        env=dict(os.environ),
    )
    assert proc.stdout, proc.stderr
    rep = json.loads(proc.stdout)
    rep["exit_code"] = proc.returncode
    return rep


def _line(c):
    return f"criterion {c['id']:2d} [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}"


def test_print_summary(report, capsys):
    with capsys.disabled():
        print()
        for c in report["criteria"]:
            print(_line(c))


@pytest.mark.parametrize("cid", range(1, 13))
def test_criterion(report, cid):
    crit = {c["id"]: c for c in report["criteria"]}[cid]
    print(_line(crit))
    assert crit["passed"], json.dumps(crit["values"])


def test_exit_code(report):
    assert report["exit_code"] == (0 if report["passed"] else 1)
