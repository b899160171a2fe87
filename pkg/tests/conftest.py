import numpy as np
import pytest

from copulagree import fit_agreement, parse_labels, prepare

# 12 units x 4 coders, nominal categories 1..5, seven missing cells.
NOMINAL_GRID = np.array([
    [1, 1, np.nan, 1],
    [2, 2, 3, 2],
    [3, 3, 3, 3],
    [3, 3, 3, 3],
    [2, 2, 2, 2],
    [1, 2, 3, 4],
    [4, 4, 4, 4],
    [1, 1, 2, 1],
    [2, 2, 2, 2],
    [np.nan, 5, 5, 5],
    [np.nan, np.nan, 1, 1],
    [np.nan, 3, np.nan, np.nan],
])

FOUR_CODERS = ["c.1.1", "c.2.1", "c.3.1", "c.4.1"]


def nominal_matrix():
    labels = parse_labels(FOUR_CODERS).labels
    return prepare(NOMINAL_GRID, labels, "nominal")


@pytest.fixture(scope="session")
def nominal_data():
    return nominal_matrix()


@pytest.fixture(scope="session")
def nominal_fit(nominal_data):
    return fit_agreement(nominal_data, confint="none", seed=7)


def make_pair_data(n_units, values=None, level="interval", labels=("c.1.1", "c.2.1")):
    """Two-coder ScoreMatrix helper for simulation-style tests."""
    parsed = parse_labels(labels).labels
    return prepare(np.asarray(values).reshape(n_units, len(labels)), parsed, level)
