import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_chain(rng, n, concentration=1.0):
    return rng.dirichlet(np.full(n, concentration), size=n)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
