import pytest

_VERDICTS: dict[str, str] = {}


@pytest.fixture
def verdict():
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def record(key, ok, detail):
        _VERDICTS[key] = f"{'PASS' if ok else 'FAIL'} {key}: {detail}"
        print(_VERDICTS[key])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS, key=lambda k: int(k.split()[0].lstrip("C"))):
        terminalreporter.write_line(_VERDICTS[key])
