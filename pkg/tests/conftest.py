import math

import numpy as np
import pytest

from fairdm.context import Classifier, Context

LN_4_3 = math.log(4 / 3)


@pytest.fixture
def ctx_a():
    """Two groups, two classes, each class seen through its own observable."""
    return Context.from_cells([
        ("X", "c0", "a", 0.3),
        ("X", "c1", "b", 0.2),
        ("Y", "c0", "a", 0.1),
        ("Y", "c1", "b", 0.4),
    ])


@pytest.fixture
def ctx_b():
    """Recidivism rates 0.56 vs 0.42 behind a single shared observable."""
    return Context.from_cells([
        ("X", "class1", "a", 0.28),
        ("X", "class0", "a", 0.22),
        ("Y", "class1", "a", 0.21),
        ("Y", "class0", "a", 0.29),
    ])


@pytest.fixture
def clf_b():
    return Classifier.constant(["a"], {"hi": 0.7, "lo": 0.3})


def compas_cells():
    """Synthetic counts: 100k per group, recidivism 56% vs 42%, high score among
    non-recidivists 44.85% vs 23.45%, among recidivists 70% for both."""
    rows = []
    for group, recid, non, high_non, high_recid in (
        ("AA", 56000, 44000, 19734, 39200),
        ("W", 42000, 58000, 13601, 29400),
    ):
        rows += [
            (group, "recid", "high", high_recid),
            (group, "recid", "low", recid - high_recid),
            (group, "non", "high", high_non),
            (group, "non", "low", non - high_non),
        ]
    return rows


@pytest.fixture
def compas_ctx():
    return Context.from_cells(compas_cells())


def identity_classifier(observables):
    return Classifier.deterministic({v: v for v in observables})


def search_context():
    """Observable reveals group membership; everyone is in the same class."""
    return Context.from_cells([("min", "c", "m", 0.2), ("maj", "c", "n", 0.8)])


def search_classifier():
    """Searches 1% of minority members at random and nobody else."""
    return Classifier(("m", "n"), ("search", "pass"), np.array([[0.01, 0.99], [0.0, 1.0]]))


SCORES = ("0", "0.25", "0.5", "0.75", "1")


def score_context():
    """One class, two groups with score rows X=(.5,0,0,.5,0) and Y=(.5,0,.25,0,.25)."""
    rows = {"X": (0.5, 0, 0, 0.5, 0), "Y": (0.5, 0, 0.25, 0, 0.25)}
    return Context.from_cells([(g, "c", s, 0.5 * p) for g, row in rows.items() for s, p in zip(SCORES, row)])


def threshold_channel(cut=0.75):
    return np.array([[0.0, 1.0] if float(s) >= cut else [1.0, 0.0] for s in SCORES])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
