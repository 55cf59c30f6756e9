import pytest

from ionphase.chain import IonChainSpec, Direction, normal_modes

ACCEPTANCE = {}


def record(criterion, passed, detail=""):
    """Store the outcome of one acceptance criterion (ANDed over its tests)."""
    prev = ACCEPTANCE.get(criterion, (True, []))
    ACCEPTANCE[criterion] = (prev[0] and passed, prev[1] + ([detail] if detail else []))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        passed, details = ACCEPTANCE[key]
        line = f"{'PASS' if passed else 'FAIL'}  criterion {key}"
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_spec():
    return IonChainSpec()


@pytest.fixture(scope="session")
def default_modes(default_spec):
    return normal_modes(default_spec)


@pytest.fixture(scope="session")
def axial_modes():
    return normal_modes(IonChainSpec(direction=Direction.AXIAL))
