"""Shared generators for random models and belief instances."""

import numpy as np
import pytest

from actinf.hmm import Hmm


def random_hmm(rng, S, O, concentration=1.0):
    """Full-support model with Dirichlet-distributed rows."""
    return Hmm(
        p0=rng.dirichlet(np.full(S, concentration)),
        A=rng.dirichlet(np.full(O, concentration), size=S),
        B=rng.dirichlet(np.full(S, concentration), size=S),
    )


def random_beliefs(rng, T, S):
    """A (T+1, S) stack of random distributions (row 0 overwritten by callers)."""
    return rng.dirichlet(np.ones(S), size=T + 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
