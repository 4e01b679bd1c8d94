import pytest

# criterion -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE: dict = {}


def record(criterion: str, passed: bool, detail: str = ""):
    ACCEPTANCE[criterion] = (passed, detail)
    return passed


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
