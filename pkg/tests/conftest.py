import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cppnmeta import cppn

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

GROWTH_RATES = cppn.MutationRates(add_connection=0.6, add_node=0.4, remove_connection=0.05,
                                  remove_node=0.05)


def grow(seed: int, steps: int = 6, registry: cppn.InnovationRegistry | None = None) -> cppn.Genome:
    """Random genome grown from the minimal network by a few mutations."""
    rng = np.random.default_rng(seed)
    reg = registry or cppn.InnovationRegistry()
    g = cppn.random_genome(rng, reg)
    for _ in range(steps):
        g = cppn.mutate(g, reg, GROWTH_RATES, rng)
    return g


seeds = st.integers(0, 2**31 - 1)
genomes = st.builds(grow, seeds, st.integers(0, 8))


def passthrough(source=cppn.INPUT_X, weight=1.0, activation="linear", bias=0.0):
    return cppn.build_genome([(3, source, cppn.OUTPUT, weight)], activation, bias)


@pytest.fixture
def registry():
    return cppn.InnovationRegistry()


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
