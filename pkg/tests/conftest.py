import numpy as np
import pytest
from hypothesis import settings

from ecekde.core import LabeledDataset

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_dataset(rng, n, K, conc=1.0):
    probs = rng.dirichlet(np.full(K, conc), size=n)
    labels = rng.integers(0, K, size=n)
    return LabeledDataset(probs, labels)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


CONVERGENCE_GRID = (250, 500, 1000, 2000, 4000, 8000, 16000)


@pytest.fixture(scope="session")
def kde_convergence_k2():
    """K=2 canonical KDE convergence study, 20 seeds, LOO-MLE bandwidth per size."""
    from ecekde.cli import build_estimators
    from ecekde.experiments import SyntheticSpec, convergence_study

    grid = [SyntheticSpec(2, n, 0.6, 0.6, 0) for n in CONVERGENCE_GRID]
    estimators, _ = build_estimators(["kde"], 1.0)
    return convergence_study(grid, estimators, seeds=20, p=1.0)
