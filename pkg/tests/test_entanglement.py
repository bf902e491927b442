"""Tests for the purification vector, operator-space entropies and bond truncation."""

import numpy as np
import pytest

from lindblad_superham.core.entanglement import (
    contract_mps,
    mutual_information,
    op_space_entropy,
    sequential_svd,
    truncation_curve,
    vectorize_state,
    von_neumann_entropy,
)
from lindblad_superham.core.models import ClassicalModelParams, build_classical
from lindblad_superham.core.operators import LatticeGeometry, random_density_matrix


def test_product_state_has_no_correlations(rng):
    sigma = np.kron(random_density_matrix(2, rng), random_density_matrix(2, rng))
    assert abs(mutual_information(sigma, [0])) <= 1e-10
    assert op_space_entropy(sigma, [0]).entropy <= 1e-10


def test_mutual_information_bounded_by_twice_entropy(rng):
    for _ in range(100):
        n = int(rng.integers(2, 4))
        lattice = LatticeGeometry(n)
        sigma = random_density_matrix(lattice.dim, rng)
        cut = list(range(int(rng.integers(1, n))))
        report = op_space_entropy(sigma, cut, lattice)
        assert report.mutual_information <= 2 * report.entropy + 1e-8
        assert report.entropy <= report.capacity(lattice) + 1e-10


def test_classical_gibbs_state_at_every_cut():
    params = ClassicalModelParams.uniform(6)
    _, sigma = build_classical(params)
    state = vectorize_state(sigma, params.lattice)
    for c in range(1, 6):
        report = op_space_entropy(sigma, list(range(c)), params.lattice, state=state)
        assert report.bound_satisfied
        assert report.entropy >= 0


def test_purification_reproduces_state(rng):
    sigma = random_density_matrix(8, rng)
    state = vectorize_state(sigma)
    assert state.sample_residual <= 1e-9
    assert np.allclose(state.reduced_state(), sigma, atol=1e-10)
    root = state.matrix()
    assert np.allclose(root @ root.conj().T, sigma)


def test_truncation_curve_respects_bound(rng):
    sigma = random_density_matrix(8, rng)
    curve = truncation_curve(sigma, [1, 2, 4, 16])
    assert all(point.within_bound for point in curve)
    assert curve[-1].trace_distance <= 1e-10
    assert np.isclose(curve[-1].overlap, 1.0)
    assert curve[0].trace_distance >= curve[-1].trace_distance


def test_truncation_and_cut_arguments_are_checked(rng):
    sigma = random_density_matrix(16, rng)
    with pytest.raises(ValueError):
        truncation_curve(sigma, [4, 2])
    with pytest.raises(ValueError):
        truncation_curve(sigma, [0, 2])
    with pytest.raises(ValueError):
        op_space_entropy(sigma, [0, 2])
    with pytest.raises(ValueError):
        mutual_information(sigma, [0, 1, 2, 3])


def test_entropy_of_maximally_mixed_state():
    assert np.isclose(von_neumann_entropy(np.eye(4) / 4), np.log(4))
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0


def test_untruncated_sweep_round_trips(rng):
    vector = rng.normal(size=64) + 1j * rng.normal(size=64)
    tensors = sequential_svd(vector, [4, 4, 4], max_bond=16)
    assert [t.shape[1] for t in tensors] == [4, 4, 4]
    assert np.allclose(contract_mps(tensors), vector)
