import pytest

from rydberg_eit.core import make_mode


@pytest.fixture(scope="session")
def parabola():
    return make_mode("parabolic", T=1.0)


@pytest.fixture(scope="session")
def gauss():
    return make_mode("gaussian", sigma=1.0, center=0.0)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record sub-check outcomes of one acceptance criterion: report(k, title, checks)."""
    store = request.config.stash[ACCEPTANCE_KEY]

    def report(number, title, checks):
        ok = all(c[1] for c in checks)
        store[number] = (title, ok, checks)
        for name, passed, detail in checks:
            print(f"  [{'ok' if passed else 'FAIL'}] {name}: {detail}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        title, ok, checks = store[number]
        failed = [name for name, passed, _ in checks if not passed]
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        if failed:
            line += "  (failed: " + "; ".join(failed) + ")"
        terminalreporter.write_line(line)
