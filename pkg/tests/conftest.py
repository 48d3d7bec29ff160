import pytest

from lockbench import resynth


@pytest.fixture(autouse=True, scope="session")
def _check_rewrites():
    # every resynthesis call in the suite verifies itself against its input
    old = resynth.CHECK_EQUIVALENCE
    resynth.CHECK_EQUIVALENCE = True
    yield
    resynth.CHECK_EQUIVALENCE = old


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
