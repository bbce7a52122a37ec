import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict; the line is echoed live and in the summary."""
    lines = request.config.stash[_KEY]
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
