import numpy as np
import pytest

from edgeorch.catalog import AccuracyConstraint
from edgeorch.simenv import EdgeCloudEnv, scenario_topology


@pytest.fixture
def env_a3():
    env = EdgeCloudEnv(scenario_topology("A", 3), AccuracyConstraint.MIN)
    env.reset(0)
    return env


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# acceptance verdicts, one line per criterion, shown in the terminal summary
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record_criterion(key: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}"
    ACCEPTANCE[key] = (ok, detail)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abcdefgh")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
