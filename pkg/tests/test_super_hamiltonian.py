"""Tests for the three super-Hamiltonian routes, their verification and locality tools."""

from dataclasses import replace

import numpy as np
import pytest

from lindblad_superham.core import super_hamiltonian
from lindblad_superham.core.errors import ApproximationError, MappingPreconditionError
from lindblad_superham.core.lindblad import HamiltonianTerm, JumpTerm, LindbladSpec, assemble, normalize_jumps
from lindblad_superham.core.models import circulant
from lindblad_superham.core.operators import (
    PAULI,
    SIGMA_MINUS,
    SIGMA_PLUS,
    LatticeGeometry,
    hermitian_power,
    pauli_basis,
    vec,
)
from lindblad_superham.core.qdb import gks_matrix
from lindblad_superham.core.super_hamiltonian import (
    ROUTE_ALIASES,
    decay_profile,
    hopping_matrix,
    jump_term_superop,
    map_basis,
    map_dense,
    map_local_jumps,
    resolve_route,
    spectrum_distance,
    sqrt_poly,
    sqrt_poly_errors,
    verify_mapping,
)


def thermal_qubits(n=2, beta=1.0):
    jumps = []
    for site in range(n):
        first = len(jumps)
        jumps.append(JumpTerm(SIGMA_MINUS, (site,), np.exp(-beta), partner=first + 1))
        jumps.append(JumpTerm(SIGMA_PLUS, (site,), np.exp(beta), partner=first))
    spec = LindbladSpec(LatticeGeometry(n), tuple(jumps))
    weights = np.diag(np.exp(-beta * np.array([1.0, -1.0])))
    sigma = weights
    for _ in range(n - 1):
        sigma = np.kron(sigma, weights)
    return spec, (sigma / np.trace(sigma)).astype(complex)


def test_spectrum_negation_on_random_instances(qdb_instance):
    """spectrum(𝓗) = −spectrum(𝓛) and 𝓗 vec(√σ) = 0 on random canonical QDB generators."""
    for _ in range(50):
        spec, sigma = qdb_instance()
        generator = assemble(spec)
        H = map_dense(generator, sigma)
        verification = verify_mapping(generator, H, sigma, tol=1e-8)
        assert verification.passed, verification.ledger.format_stats_summary()
        root = vec(hermitian_power(sigma, 0.5))
        assert np.linalg.norm(H.matrix @ root) <= 1e-8


def test_all_routes_agree_on_random_instances(qdb_instance):
    for _ in range(20):
        spec, sigma = qdb_instance()
        generator = assemble(spec)
        dense = map_dense(generator, sigma).matrix
        jumps = map_local_jumps(spec).matrix
        frame = map_basis(gks_matrix(generator, pauli_basis(spec.lattice, spec.k))).matrix
        tol = 1e-9 * max(1.0, np.max(np.abs(dense)))
        assert np.max(np.abs(dense - jumps)) <= tol
        assert np.max(np.abs(dense - frame)) <= tol
        assert np.max(np.abs(jumps - frame)) <= tol


def test_all_routes_agree_on_thermal_qubits():
    spec, sigma = thermal_qubits()
    generator = assemble(spec)
    dense = map_dense(generator, sigma).matrix
    jumps = map_local_jumps(spec).matrix
    frame = map_basis(gks_matrix(generator, pauli_basis(spec.lattice, 1))).matrix
    scale = np.linalg.norm(dense)
    assert np.linalg.norm(dense - jumps) <= 1e-9 * scale
    assert np.linalg.norm(dense - frame) <= 1e-9 * scale


def test_maximally_mixed_state_gives_negated_generator():
    spec = LindbladSpec(LatticeGeometry(1), (JumpTerm(SIGMA_MINUS, (0,), 0.7, partner=1),
                                             JumpTerm(SIGMA_PLUS, (0,), 0.7, partner=0)))
    generator = assemble(spec)
    H = map_dense(generator, np.eye(2) / 2)
    assert np.allclose(H.matrix, -generator.matrix)


def test_jump_term_superop_is_hermitian_for_balanced_pair():
    term = jump_term_superop(SIGMA_MINUS, 0.5, 2.0) + jump_term_superop(SIGMA_PLUS, 2.0, 0.5)
    assert np.allclose(term, term.conj().T)
    assert np.linalg.eigvalsh(term).min() > -1e-12


def test_jump_route_preconditions():
    coherent = LindbladSpec(LatticeGeometry(1), (JumpTerm(SIGMA_MINUS, (0,), partner=0),),
                            (HamiltonianTerm(PAULI['Z'], (0,)),))
    with pytest.raises(MappingPreconditionError):
        map_local_jumps(coherent)

    unpaired = LindbladSpec(LatticeGeometry(1), (JumpTerm(SIGMA_MINUS, (0,)),))
    with pytest.raises(MappingPreconditionError):
        map_local_jumps(unpaired)

    duplicated = LindbladSpec(LatticeGeometry(1), (
        JumpTerm(SIGMA_MINUS, (0,), partner=1), JumpTerm(SIGMA_PLUS, (0,), partner=0),
        JumpTerm(SIGMA_MINUS, (0,), partner=3), JumpTerm(SIGMA_PLUS, (0,), partner=2)))
    with pytest.raises(MappingPreconditionError):
        map_local_jumps(duplicated)


def test_frame_route_rejects_non_commuting_coefficients(rng):
    lattice = LatticeGeometry(2)
    jumps = []
    for _ in range(2):
        L = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        jumps.append(JumpTerm(L - np.trace(L) / 4 * np.eye(4), (0, 1)))
    C = gks_matrix(LindbladSpec(lattice, tuple(jumps)), pauli_basis(lattice, 2))
    with pytest.raises(MappingPreconditionError, match=r"\[C,C\*\]"):
        map_basis(C)


def test_spectrum_distance():
    assert spectrum_distance([1.0, 2.0, 3.0], [3.0, 1.0, 2.0]) == 0.0
    assert np.isclose(spectrum_distance([0.0, 1.0], [0.0, 1.5]), 0.5)
    assert spectrum_distance([0.0], [0.0, 1.0]) == float('inf')


def test_sqrt_poly_error_bound(rng):
    for _ in range(20):
        dim = int(rng.integers(2, 40))
        Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
        eigenvalues = rng.uniform(1.0, 100.0, size=dim)
        A = (Q * eigenvalues) @ Q.conj().T
        for m in range(1, 41):
            result = sqrt_poly(A, m)
            assert result.within_bound, (dim, m, result.error, result.bound)

    with pytest.raises(ValueError):
        sqrt_poly(np.eye(2), 0)


def test_sqrt_poly_error_curve_decays():
    A = circulant(20, 3.0, 1.0)
    curve = sqrt_poly_errors(A, range(1, 30))
    assert np.all(np.diff(curve.errors) <= 1e-15)
    assert curve.rate > 0
    assert np.all(curve.errors <= curve.bounds * (1 + 1e-6))


def test_decay_profile_of_banded_root():
    """√A of a banded gapped A decays exponentially and respects the locality bound."""
    lattice = LatticeGeometry(40)
    M = hermitian_power(circulant(40, 3.0, 1.0), 0.5)
    profile = decay_profile(M, [(i,) for i in range(40)], lattice, k=1)
    assert profile.bound_holds
    assert not profile.degenerate
    assert profile.rate > 0
    assert profile.preferred_fit == "exponential"
    assert np.isclose(profile.lam_min, 1.0) and np.isclose(profile.lam_max, 5.0)
    assert np.isnan(profile.c1) and np.isnan(profile.c2)

    with pytest.raises(ValueError):
        decay_profile(M, [(0,)], lattice)


def test_decay_profile_reports_normalized_constants():
    lattice = LatticeGeometry(40)
    M = hermitian_power(circulant(40, 3.0, 1.0), 0.5)
    profile = decay_profile(M, [(i,) for i in range(40)], lattice, k=1, coefficients=M)
    J = np.max(np.abs(M))
    assert np.isclose(profile.coupling, J)
    assert np.isclose(profile.c1 * J, profile.prefactor)
    assert np.isclose(profile.c2 * profile.lam_min / J ** 2, profile.rate)
    assert profile.c2 > 0
    assert np.allclose(profile.coupling_curve(), profile.prefactor * np.exp(-profile.rate * profile.distances))


def test_hopping_matrix_drops_rounding_on_kernel(rng):
    """A real rank-deficient C is its own (C C̄)^{1/2}; kernel noise must not survive the roots."""
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    K = (Q[:, :2] * np.array([1.0, 0.3])) @ Q[:, :2].T
    spec, _ = thermal_qubits()
    C = replace(gks_matrix(assemble(spec), pauli_basis(spec.lattice, 1)), matrix=K.astype(complex))
    assert np.max(np.abs(hopping_matrix(C) - K)) <= 1e-12


def test_route_aliases_resolve():
    assert ROUTE_ALIASES == {'thm31': 'jumps', 'thm32': 'frame'}
    assert resolve_route('thm31') == 'jumps'
    assert resolve_route('thm32') == 'frame'
    assert resolve_route('dense') == 'dense'
    with pytest.raises(ValueError, match="Unknown route"):
        resolve_route('thm33')


def test_jump_route_requires_unit_norm_jumps():
    lattice = LatticeGeometry(1)
    spec = LindbladSpec(lattice, (JumpTerm(2.0 * SIGMA_MINUS, (0,), np.exp(-0.5), partner=1),
                                  JumpTerm(2.0 * SIGMA_PLUS, (0,), np.exp(0.5), partner=0)))
    with pytest.raises(MappingPreconditionError, match="normalize_jumps"):
        map_local_jumps(spec)

    normalized = normalize_jumps(spec)
    assert np.allclose(assemble(normalized).matrix, assemble(spec).matrix)
    for term in normalized.jumps:
        assert np.isclose(np.vdot(term.matrix, term.matrix).real, 1.0)

    sigma = np.diag(np.exp(-0.5 * np.array([1.0, -1.0])))
    sigma = (sigma / np.trace(sigma)).astype(complex)
    assert np.allclose(map_local_jumps(normalized).matrix, map_dense(assemble(spec), sigma).matrix, atol=1e-9)

    with pytest.raises(ValueError):
        normalize_jumps(LindbladSpec(lattice, (JumpTerm(np.zeros((2, 2)), (0,)),)))


def test_sqrt_poly_error_bound_at_larger_dimension(rng):
    for _ in range(3):
        Q, _ = np.linalg.qr(rng.normal(size=(200, 200)) + 1j * rng.normal(size=(200, 200)))
        A = (Q * rng.uniform(1.0, 100.0, size=200)) @ Q.conj().T
        for m in (1, 5, 10, 20, 40):
            result = sqrt_poly(A, m)
            assert result.error <= result.bound * (1 + 1e-6), (m, result.error, result.bound)


def test_sqrt_poly_raises_when_bound_is_missed(monkeypatch):
    monkeypatch.setattr(super_hamiltonian, "_sqrt_series", lambda degree: np.zeros(degree))
    with pytest.raises(ApproximationError):
        sqrt_poly(np.diag([1.0, 4.0]), 3)
