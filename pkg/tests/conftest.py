"""Shared fixtures for the lindblad_superham test suite."""

import numpy as np
import pytest

from lindblad_superham.core.models import ClassicalModelParams, FermionParams
from lindblad_superham.core.operators import random_density_matrix
from lindblad_superham.core.qdb import random_canonical_spec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def classical_params():
    """Uniform ring of four sites, ε = 1, μ = 0, u = 0.5, β = 1."""
    return ClassicalModelParams.uniform(4, eps=1.0, mu=0.0, u=0.5, beta=1.0)


@pytest.fixture
def fermion_params():
    return FermionParams(4, (3.0, 1.0), (2.0, 0.5))


@pytest.fixture
def qdb_instance(rng):
    """Factory for random canonical-form QDB generators on n qubits."""

    def make(n=2, density=0.5):
        sigma = random_density_matrix(2 ** n, rng)
        return random_canonical_spec(sigma, rng, density=density), sigma

    return make


@pytest.fixture
def quiet_cli(monkeypatch, tmp_path):
    """Keep CLI runs away from the user's data directory and config."""
    monkeypatch.setenv("SUPERHAM_LOG_FILE", "stderr")
    monkeypatch.setenv("SUPERHAM_CONFIG_PATH", str(tmp_path / "missing-settings.yaml"))
    monkeypatch.delenv("SUPERHAM_OUT_DIR", raising=False)
    return tmp_path
