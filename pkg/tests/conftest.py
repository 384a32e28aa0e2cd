from __future__ import annotations

import pytest

from logrank import _kernels
from logrank.corpus import sign_corpus

BACKENDS = ["python"] + (["cython"] if _kernels.compiled_backend is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    previous = _kernels.select(request.param)
    yield request.param
    _kernels.select(previous)


@pytest.fixture(scope="session")
def corpus():
    return sign_corpus()


# criterion -> "PASS"/"FAIL" line, filled by test_acceptance
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
