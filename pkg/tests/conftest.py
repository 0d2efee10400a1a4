import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
_CRITERIA: dict[str, str] = {}


@pytest.fixture
def report():
    def record(number: str, title: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} -- {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_CRITERIA, key=lambda k: (int(k.rstrip("abcd")), k)):
            terminalreporter.write_line(_CRITERIA[key])
