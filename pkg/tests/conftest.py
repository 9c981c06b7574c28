import pytest

from busycheck.lang import parse


@pytest.fixture
def waiting_pair():
    """One thread set up to exit while the main thread busy-waits."""
    return parse("fork { exit }; loop skip")


@pytest.fixture
def two_level_fork():
    """Forks a forker: the inner thread busy-waits, the middle one exits."""
    return parse("fork { fork { loop skip }; exit }; loop skip")


@pytest.fixture
def bare_loop():
    return parse("loop skip")
