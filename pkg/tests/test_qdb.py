"""Tests for detailed-balance residuals, modular bases, GKS data and canonical forms."""

import numpy as np
import pytest

from lindblad_superham.core.errors import NotQDBError, SingularStateError
from lindblad_superham.core.lindblad import HamiltonianTerm, LindbladSpec, assemble
from lindblad_superham.core.operators import PAULI, hs_inner, random_density_matrix, vec
from lindblad_superham.core.qdb import (
    adjoint_superop,
    canonical_form,
    commutator_check,
    deformed_family,
    gamma_apply,
    gamma_superop,
    gks_matrix,
    modular_basis,
    qdb_residual,
    random_psd,
)
from lindblad_superham.core.super_hamiltonian import map_dense


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
def test_canonical_generators_satisfy_qdb(qdb_instance, s):
    for _ in range(5):
        spec, sigma = qdb_instance()
        residual = qdb_residual(spec, sigma, s)
        assert residual.holds(1e-10), residual


def test_coherent_term_breaks_qdb(qdb_instance):
    spec, sigma = qdb_instance()
    coherent = LindbladSpec(spec.lattice, spec.jumps, (HamiltonianTerm(PAULI['X'], (0,)),), name="coherent")
    assert qdb_residual(coherent, sigma, 1.0).qdb1 > 1e-3


def test_singular_state_and_bad_s_are_rejected(qdb_instance):
    spec, _ = qdb_instance()
    with pytest.raises(SingularStateError):
        qdb_residual(spec, np.diag([1.0, 0.0, 0.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        gamma_superop(np.eye(4) / 4, 1.5)


def test_modular_basis_diagonalizes_modular_operator(rng):
    sigma = random_density_matrix(4, rng)
    basis = modular_basis(sigma)
    flat = basis.operators.reshape(len(basis), -1)
    assert np.allclose(flat.conj() @ flat.T, np.eye(16))
    assert np.allclose(basis.operators[0], np.eye(4) / 2)

    inverse = np.linalg.inv(sigma)
    for operator, omega in zip(basis.operators, basis.frequencies):
        assert np.allclose(sigma @ operator @ inverse, np.exp(-omega) * operator)
    for index, partner in enumerate(basis.partner):
        assert np.allclose(basis.operators[partner], basis.operators[index].conj().T)


def test_gks_matrix_is_diagonal_in_modular_basis(qdb_instance):
    """QDB generators stay diagonal under the whole deformed family."""
    for _ in range(5):
        spec, sigma = qdb_instance()
        basis = modular_basis(sigma)
        coefficients = gks_matrix(spec, basis)
        assert coefficients.offdiagonal_mass() <= 1e-8
        assert commutator_check(coefficients) <= 1e-10
        assert coefficients.is_psd()
        for x in (-1.0, 0.25, 0.5, 2.0):
            deformed = gks_matrix(deformed_family(spec, sigma, 1.0, x), basis)
            assert deformed.offdiagonal_mass() <= 1e-8


def test_commutator_check_on_qdb_and_generic_data(qdb_instance, rng):
    qdb_values = []
    for _ in range(100):
        spec, sigma = qdb_instance()
        qdb_values.append(commutator_check(gks_matrix(spec, modular_basis(sigma))))
    assert max(qdb_values) <= 1e-10

    generic = [commutator_check(random_psd(6, rng)) for _ in range(100)]
    assert np.median(generic) > 1e-3
    assert commutator_check(np.diag([1.0, 2.0, 3.0])) == 0.0


def test_super_hamiltonian_is_independent_of_s(qdb_instance):
    for _ in range(5):
        spec, sigma = qdb_instance()
        reference = map_dense(spec, sigma, 1.0).matrix
        scale = np.linalg.norm(reference)
        for s in (0.0, 0.3):
            assert np.linalg.norm(map_dense(spec, sigma, s).matrix - reference) <= 1e-9 * scale


def test_canonical_form_rebuilds_generator(qdb_instance):
    for _ in range(5):
        spec, sigma = qdb_instance(density=0.7)
        generator = assemble(spec)
        form = canonical_form(generator, sigma)
        assert len(form) >= 1
        assert np.all(form.weights > 0)
        rebuilt = form.rebuild().matrix
        assert np.linalg.norm(rebuilt - generator.matrix) <= 1e-8 * np.linalg.norm(generator.matrix)


def test_canonical_form_rejects_non_qdb(qdb_instance):
    spec, sigma = qdb_instance()
    coherent = LindbladSpec(spec.lattice, spec.jumps, (HamiltonianTerm(PAULI['Y'], (1,)),))
    with pytest.raises(NotQDBError):
        canonical_form(coherent, sigma)


def test_adjoint_is_conjugate_transpose(qdb_instance):
    spec, _ = qdb_instance()
    generator = assemble(spec)
    assert np.allclose(adjoint_superop(generator).matrix, generator.matrix.conj().T)


def test_gamma_apply(rng):
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.allclose(gamma_apply(np.eye(4) / 4, 0.3, 1.5, A), A / 4 ** 1.5)
    sigma = random_density_matrix(4, rng)
    assert np.allclose(gamma_apply(sigma, 0.7, 0.0, A), A)

    E12 = np.array([[0.0, 1.0], [0.0, 0.0]])
    diagonal = np.diag([0.75, 0.25])
    assert np.allclose(gamma_apply(diagonal, 0.0, 2.0, E12), 0.75 ** 2 * E12)
    assert np.allclose(gamma_apply(diagonal, 1.0, 2.0, E12), 0.25 ** 2 * E12)

    B = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    for s in (0.0, 0.5, 1.0):
        left = hs_inner(A, gamma_apply(sigma, s, 1.0, B))
        right = hs_inner(gamma_apply(sigma, s, 1.0, A), B)
        assert np.isclose(left, right)
        assert np.allclose(gamma_superop(sigma, s, 0.5) @ vec(A), vec(gamma_apply(sigma, s, 0.5, A)))
