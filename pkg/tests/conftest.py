import pytest

from hemlet.hwconfig import SystemConfig
from hemlet.workload import ViTModelSpec

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def tiny():
    """Two-block toy model small enough for exhaustive checks."""
    return ViTModelSpec("tiny", d=64, D=256, N=2, H=2, L=40)


@pytest.fixture
def small():
    return ViTModelSpec("small", d=128, D=512, N=3, H=4, L=70)


@pytest.fixture
def config():
    return SystemConfig()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
