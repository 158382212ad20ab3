import numpy as np
import pytest

from edgecache import env
from edgecache.config import SystemConfig, profile_defaults

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def desk():
    return profile_defaults("desk-consistent")


@pytest.fixture
def system():
    return SystemConfig()


def fixed_slot(ph, power=0.5):
    """Slot whose received powers p*h equal ``ph`` exactly (unit fading)."""
    ph = np.asarray(ph, dtype=float)
    power = np.full(len(ph), power)
    return env.SlotRealization(np.ones(len(ph)), ph / power, power)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
