import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    def record(number, passed, value, tol, note=""):
        status = "PASS" if passed else "FAIL"
        extra = f" {note}" if note else ""
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {status}  value={value:.3g}  tol={tol:.3g}{extra}"
        print(ACCEPTANCE_LINES[number])

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
