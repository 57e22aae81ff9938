import warnings

import pytest

CRITERIA: list[str] = []


def report(label: str, ok: bool, detail: str = "") -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
    CRITERIA.append(line)
    print(line, flush=True)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet_threshold_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="mu_s")
        yield
