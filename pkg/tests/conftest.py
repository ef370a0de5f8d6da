import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sphere(rng, count, n):
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def random_ball(rng, count, n, rmax=0.95):
    r = rmax * rng.uniform(size=count) ** (1.0 / (2 * n))
    return r[:, None] * random_sphere(rng, count, n)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(number: int, name: str, passed: bool, detail: str, seconds: float):
        line = f"criterion {number} {name}: {'PASS' if passed else 'FAIL'} ({detail}; {seconds:.1f} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
