import sys

import numpy as np
import pytest

from hetcons.scenario import builtin_example
from hetcons.sim import design, run_scenario


@pytest.fixture(scope="session")
def sinusoid_design():
    return design(builtin_example(ref="sinusoid"))


@pytest.fixture(scope="session")
def ramp_design():
    return design(builtin_example(ref="ramp"))


@pytest.fixture(scope="session")
def runs():
    """Full runs of the built-in example keyed by (reference, mode)."""
    cache = {}

    def get(ref, mode, method="lqg"):
        key = (ref, mode, method)
        if key not in cache:
            cache[key] = run_scenario(builtin_example(ref=ref, mode=mode, method=method))
        return cache[key]
    return get


def random_stable(rng, n, shift=0.5):
    A = rng.standard_normal((n, n))
    return A - (np.max(np.linalg.eigvals(A).real) + shift) * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
