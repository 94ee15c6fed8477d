import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from irisift import kernels  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _backends():
    out = [pytest.param(kernels.python_backend, id="python")]
    if kernels.compiled_backend is not None:
        out.append(pytest.param(kernels.compiled_backend, id="cython"))
    return out


@pytest.fixture(params=_backends())
def backend(request):
    return request.param


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by this test")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, text = mark.args
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    entry = _CRITERIA.setdefault(number, {"text": text, "ok": True, "ran": False})
    if call.when == "call":
        entry["ran"] = True
    if failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['text']}")
