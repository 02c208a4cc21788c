import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

# criterion number -> (passed, detail); filled by tests marked ``criterion``
_CRITERIA: dict[int, list] = {}


@pytest.fixture
def criterion_detail(request):
    """Attach a one-line summary to the criterion of the calling test."""
    n = request.node.get_closest_marker("criterion").args[0]

    def record(text: str) -> None:
        _CRITERIA.setdefault(n, [True, []])[1].append(text)

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    entry = _CRITERIA.setdefault(marker.args[0], [True, []])
    if rep.failed:
        entry[0] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, details = _CRITERIA[n]
        terminalreporter.write_line("criterion %d: %s | %s" % (n, "PASS" if ok else "FAIL", "; ".join(details)))
