import pytest

_RESULTS = []


class Verdict:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.passed = None
        self.detail = ""

    def __call__(self, passed, detail=""):
        self.passed = bool(passed)
        self.detail = detail
        return self.passed


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    marker = request.node.get_closest_marker("criterion")
    verdict = Verdict(*marker.args)
    yield verdict
    if verdict.passed is None:
        verdict(False, "raised before a verdict was reached")
    _RESULTS.append(verdict)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for v in sorted(_RESULTS, key=lambda v: v.number):
        status = "PASS" if v.passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {v.number}. {v.title}: {v.detail}")
