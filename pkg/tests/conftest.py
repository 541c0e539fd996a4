import pytest

_LEDGER_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_LEDGER_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record (criterion, part, ok, detail) rows for the end-of-run summary."""
    store = request.config.stash[_LEDGER_KEY]

    def record(number: int, title: str, ok: bool, detail: str):
        entry = store.setdefault(number, {"title": title, "parts": []})
        entry["parts"].append((bool(ok), detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_LEDGER_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        entry = store[number]
        ok = all(p[0] for p in entry["parts"])
        detail = "; ".join(d for _, d in entry["parts"])
        terminalreporter.write_line(
            f"AC-{number:02d} {'PASS' if ok else 'FAIL'} {entry['title']}: {detail}")
