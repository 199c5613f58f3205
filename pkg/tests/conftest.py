import pytest

from mmcast.scenario import bundled, two_user


@pytest.fixture(scope="session")
def table1():
    return bundled("table1")


@pytest.fixture(scope="session")
def twouser8():
    return two_user(8.0, 50.0)


@pytest.fixture(scope="session")
def twouser40():
    return two_user(40.0, 50.0)


def pytest_terminal_summary(terminalreporter):
    from report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
