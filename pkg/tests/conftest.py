"""
Shared fixtures for the test suite.
"""

import numpy as np
import pytest

from sme_manifolds.ops import normalize_ket, projector


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def qutrit_rho0():
    """Pure qutrit start state with populations (0.3, 0.55, 0.15)."""
    return projector(normalize_ket(np.sqrt([0.3, 0.55, 0.15])))


@pytest.fixture
def maximally_mixed():
    def make(dim):
        return np.eye(dim, dtype=complex) / dim
    return make
