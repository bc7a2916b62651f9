"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(tag, title): acceptance criterion a test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when == "teardown":
        return
    if rep.when == "setup" and rep.passed:
        return
    tag, title = marker.args
    entry = _RESULTS.setdefault(tag, {"title": title, "ok": True, "seconds": 0.0, "tests": 0})
    entry["tests"] += 1
    entry["seconds"] += rep.duration
    entry["ok"] = entry["ok"] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(_RESULTS, key=lambda t: int(t[2:])):
        e = _RESULTS[tag]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"{tag} {status}  {e['title']}  ({e['seconds']:.1f} s)")
