from dataclasses import replace

import pytest

from rpid.causal_graph import graph_from_lists
from rpid.config import builtin_config_path, load_config

CREDIT_VARIABLES = [
    ("Gender", "binary", "protected"),
    ("Age", "continuous", "confounder"),
    ("Amount", "continuous", "mediator"),
    ("Savings", "binary", "mediator"),
    ("Risk", "binary", "target"),
]
CREDIT_EDGES = [
    ("Age", "Amount"), ("Age", "Savings"), ("Age", "Risk"),
    ("Amount", "Risk"), ("Savings", "Risk"),
    ("Gender", "Amount"), ("Gender", "Savings"), ("Gender", "Risk"),
]


@pytest.fixture
def credit_graph():
    return graph_from_lists(CREDIT_VARIABLES, CREDIT_EDGES)


@pytest.fixture(scope="session")
def sim1_config():
    return load_config(builtin_config_path("sim1"))


@pytest.fixture
def small_sim(sim1_config):
    """sim1 generators at a size that runs in well under a second."""
    return replace(sim1_config.require_simulation(), n_train=600, n_test=200, iterations=3)


# acceptance lines, filled by test_acceptance.py and echoed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
