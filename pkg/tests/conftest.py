import numpy as np
import pytest

# Results recorded by tests/test_acceptance.py; printed in the terminal
# summary so every criterion shows one pass/fail line even under capture.
ACCEPTANCE_RESULTS = []


def record_criterion(number, description, passed, detail=""):
    line = (f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'} - "
            f"{description}" + (f" ({detail})" if detail else ""))
    ACCEPTANCE_RESULTS.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
