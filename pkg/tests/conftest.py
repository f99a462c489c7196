import numpy as np
import pytest

# Lines collected by the acceptance module and echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_acceptance():
    def record(number: int, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        line = f"ACCEPTANCE criterion {number}: {status}"
        if detail:
            line += f"  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
