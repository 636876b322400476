import math

import numpy as np
import pytest

from retrial_jsq import new_params

TABLE_TRIPLES = [(2.0, 10.0, 3.0), (3.0, 10.0, 3.0), (4.0, 10.0, 3.0)]

# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES = {}


def lam_for_rho(rho, mu, alpha):
    """Arrival rate giving load ``rho``: root of lam^2 + 2 alpha lam - 2 alpha mu rho = 0."""
    return -alpha + math.sqrt(alpha * alpha + 2.0 * alpha * mu * rho)


def random_stable_triples(count, seed, rho_range=(0.05, 0.95)):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        mu = rng.uniform(1.0, 20.0)
        alpha = rng.uniform(0.5, 20.0)
        rho = rng.uniform(*rho_range)
        out.append(new_params(lam_for_rho(rho, mu, alpha), mu, alpha))
    return out


@pytest.fixture
def base_params():
    return new_params(2.0, 10.0, 3.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
