import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(number, title): test belongs to a numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    entry = _RESULTS.setdefault(number, {"title": title, "passed": True, "failed": []})
    if not report.passed:
        entry["passed"] = False
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        status = "PASS" if entry["passed"] else "FAIL"
        line = f"ACCEPTANCE {number:2d} {status}  {entry['title']}"
        if entry["failed"]:
            line += "  [failed: " + ", ".join(entry["failed"]) + "]"
        terminalreporter.write_line(line)
