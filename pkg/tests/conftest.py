"""Acceptance bookkeeping: one PASS/FAIL line per criterion at the end of the run."""
import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = marker.args
    details = [v for k, v in item.user_properties if k == "detail"]
    if not report.passed:
        details.append(f"{item.name}: {report.when} failed")
    # parametrized criteria pass only if every case passes
    _, passed, earlier = _results.get(number, (title, True, []))
    _results[number] = (title, passed and report.passed, earlier + details)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        title, passed, details = _results[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}")
        for line in details:
            terminalreporter.write_line(f"         {line}")


@pytest.fixture
def detail(request):
    """Attach a line of evidence to the current test's acceptance report."""
    def add(text):
        request.node.user_properties.append(("detail", text))
    return add
