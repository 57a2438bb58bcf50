import pytest

# criterion id -> {"ok": bool, "details": [str]}
_RESULTS: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion checked by the test")


def _entry(crit):
    return _RESULTS.setdefault(crit, {"ok": True, "details": []})


@pytest.fixture
def note(request):
    """Attach a measured value to the criterion line printed at the end of the run."""
    marker = request.node.get_closest_marker("criterion")
    return lambda text: _entry(marker.args[0])["details"].append(text)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _entry(marker.args[0])
    if rep.failed or (rep.when == "call" and not rep.passed) or (rep.skipped and rep.when == "setup"):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_RESULTS, key=lambda c: int(c[1:])):
        entry = _RESULTS[crit]
        status = "PASS" if entry["ok"] else "FAIL"
        details = "; ".join(entry["details"])
        terminalreporter.write_line(f"{crit} {status}" + (f"  {details}" if details else ""))
