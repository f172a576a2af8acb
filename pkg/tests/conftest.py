import numpy as np
import pytest

from orlicz_frac.young import combine, make_family


def family_zoo():
    p2 = make_family("power", [2])
    p3 = make_family("power", [3])
    return {
        "power2": p2,
        "power3": p3,
        "power1.5": make_family("power", [1.5]),
        "powerlog": make_family("power-log", [1, 1, 1]),
        "powerlog_b2": make_family("power-log", [1, 2, 1]),
        "powerlog_a2": make_family("power-log", [2, 1, 1]),
        "spliced": make_family("spliced-power", [1, 2, 1]),
        "sum": combine("sum", p2, p3, [1.0, 0.5]),
        "product": combine("product", p2, p3),
        "composition": combine("composition", p2, p3),
    }


@pytest.fixture(scope="session")
def zoo():
    return family_zoo()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
