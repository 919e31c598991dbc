import re

import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the acceptance criterion named in the test."""
    n = int(re.search(r"criterion_(\d+)", request.node.name).group(1))

    def _report(ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok

    yield _report
    if n not in _ACCEPTANCE:
        # the test raised before it could report
        _ACCEPTANCE[n] = f"criterion {n}: FAIL  error before the check completed"


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
