"""Tests for local gaps, ring certificates and the local-gap table."""

import numpy as np
import pytest
from scipy import sparse

from lindblad_superham.core.errors import SpectrumError
from lindblad_superham.core.knabe import (
    certify_classical,
    classical_local_terms,
    classical_pair_gap,
    classical_projector_gap,
    distant_commutators,
    frustration_free_residuals,
    knabe_bound,
    knabe_table,
    local_gap,
    positive_projector,
    sparse_gap,
)
from lindblad_superham.core.models import ClassicalModelParams

TABLE = {
    "random": ((0.756, 0.887, 0.678), 0.05),
    "const eps=1": ((0.769, 0.913, 0.778), 0.02),
    "const eps=0.5": ((0.755, 0.891, 0.698), 0.02),
    "alternating eps=1,10": ((0.993, 0.998, 0.997), 0.02),
}


def test_knabe_bound():
    assert np.isclose(knabe_bound(1.0), 1.0)
    assert np.isclose(knabe_bound(0.5), 0.0)
    assert knabe_bound(0.4) < 0
    assert np.isclose(knabe_bound(1.0, degree=3), 1.0)
    with pytest.raises(ValueError):
        knabe_bound(0.9, degree=1)
    with pytest.raises(ValueError):
        knabe_bound(3.0)


def test_local_terms_are_frustration_free(classical_params):
    terms = classical_local_terms(classical_params)
    assert len(terms) == 4
    ledger = frustration_free_residuals(terms)
    assert ledger.passed, ledger.format_stats_summary()


def test_projector_gap_closed_form(classical_params):
    terms = classical_local_terms(classical_params)
    expected = (np.exp(-1.0) + np.exp(-0.75)) / 2
    for k, term in enumerate(terms.terms):
        P, g = positive_projector(term.matrix)
        assert np.allclose(P @ P, P)
        assert np.isclose(g, classical_projector_gap(classical_params, k))
        assert np.isclose(g, expected)

    with pytest.raises(SpectrumError):
        positive_projector(np.zeros((4, 4)))


def test_local_gap_matches_pair_formula(classical_params):
    gap = local_gap(classical_local_terms(classical_params))
    assert len(gap.pairs) == 4
    assert np.isclose(gap.value, classical_pair_gap(classical_params, 0), atol=1e-8)
    assert abs(gap.value - 0.9135) <= 5e-4

    with pytest.raises(ValueError):
        classical_pair_gap(ClassicalModelParams.uniform(3), 0)


def test_local_gap_table():
    table = knabe_table(instances=100, progress=False)
    assert table.n == 4 and table.beta == 1.0
    for label, (expected, tol) in TABLE.items():
        row = table.row(label)
        assert np.allclose(row.gamma_loc, expected, atol=tol), (label, row.gamma_loc)
    assert len(table.row("random").spread) == 3
    with pytest.raises(KeyError):
        table.row("missing")
    with pytest.raises(ValueError):
        knabe_table(n=5, instances=1, progress=False)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_ring_certificate(n):
    certificate = certify_classical(ClassicalModelParams.uniform(n))
    assert certificate.valid
    assert certificate.ledger.passed, certificate.ledger.format_stats_summary()
    assert certificate.projector_gap >= certificate.bound - 1e-8
    assert certificate.hamiltonian_gap >= certificate.hamiltonian_bound - 1e-8


def test_distant_terms_commute():
    terms = classical_local_terms(ClassicalModelParams.random(6, np.random.default_rng(3), u=2.0))
    assert distant_commutators(terms) <= 1e-10


def test_sparse_gap_on_diagonal_matrix():
    gap, kernel = sparse_gap(sparse.diags([0.0, 2.0, 3.0, 0.0]))
    assert np.isclose(gap, 2.0)
    assert kernel == 2
