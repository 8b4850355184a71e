import numpy as np
import pytest

from rydgate.params import default_params


def light_params(gate="toffoli-linear", ratio=4.0, **extra):
    """Defaults with the interaction (and matched detunings) lowered to
    ``ratio * omega_c`` so full-sequence runs take about a second."""
    p = default_params(gate)
    v = ratio * p.omega_c
    return p.replace(v=v, delta=v, delta_prime=2 * v, **extra)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# lines recorded by the acceptance module, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
