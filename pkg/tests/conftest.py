import functools

import pytest

from curvindex.catalog import catalog_instance, instance_keys


@functools.lru_cache(maxsize=None)
def _instance(key):
    return catalog_instance(key)


@pytest.fixture
def inst():
    """Look up a catalog instance by key (cached across tests)."""
    return _instance


@pytest.fixture(params=instance_keys())
def any_spec(request):
    return _instance(request.param)


def pytest_configure(config):
    config.addinivalue_line("markers", "timeout_budget(seconds): documented wall-clock budget of a test")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
