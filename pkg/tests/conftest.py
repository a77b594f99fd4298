import pytest

from lhsig import scheme
from lhsig.sampler import RandomStream


@pytest.fixture(scope="session")
def toy16():
    pp = scheme.setup_profile("toy16")
    pk, sk = scheme.key_gen(pp, RandomStream(b"fixture-toy16"))
    return pk.params, pk, sk


@pytest.fixture
def rng(request):
    # one stream per test, keyed by its name, so tests stay independent
    return RandomStream(request.node.name.encode())


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def record(request):
    """Log one acceptance line: ``record(name, passed, detail)``."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def _record(name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
