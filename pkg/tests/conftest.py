import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Record one PASS/FAIL line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(num, name, ok, detail):
        line = f"criterion {num} {'PASS' if ok else 'FAIL'}: {name} ({detail})"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
