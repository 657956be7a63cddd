import numpy as np
import pytest

from graminspect.numerics import make_rng


@pytest.fixture
def rng():
    return make_rng(20201204)


def random_graph(rng, n, p=0.35):
    a = rng.random((n, n)) < p
    a = a | a.T | np.eye(n, dtype=bool)
    return a


ACCEPTANCE: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
