import re

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

_CRITERIA: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion():
    """Record the verdict of one acceptance criterion: ``criterion(n, ok, detail)``."""

    def record(n, ok, detail):
        _CRITERIA[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA, key=lambda k: [int(x) for x in re.findall(r"\d+", str(k))]):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {str(n):<8} {'PASS' if ok else 'FAIL'}  {detail}")
