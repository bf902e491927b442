"""Tests for the classical-like ring and the quadratic fermion model."""

import numpy as np
import pytest

from lindblad_superham.core.errors import NotQDBError
from lindblad_superham.core.lindblad import assemble, normalize_jumps, spectrum_and_gap
from lindblad_superham.core.models import (
    ClassicalModelParams,
    FermionParams,
    SingleParticleModel,
    build_classical,
    build_fermionic_manybody,
    circulant,
    classical_jump,
    classical_rate_matrix,
    classical_super_term,
    classical_term_checks,
    classical_term_spec,
    fermionic_lindbladian_apply,
    fermionic_modes,
    fermionic_super_h_coeffs,
    gaussian_steady_state,
    hopping_coefficients,
    jordan_wigner,
    mode_occupations,
    uniqueness_report,
)
from lindblad_superham.core.operators import SIGMA_MINUS, kron_all, random_density_matrix
from lindblad_superham.core.qdb import qdb_residual
from lindblad_superham.core.super_hamiltonian import map_dense, map_local_jumps

P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])


class TestClassicalModel:
    def test_jump_projects_neighbour_occupations(self):
        assert np.allclose(classical_jump(0), kron_all([P0, SIGMA_MINUS, P0]))
        assert np.allclose(classical_jump(1), kron_all([P0, SIGMA_MINUS, P1]) + kron_all([P1, SIGMA_MINUS, P0]))
        assert np.allclose(classical_jump(2), kron_all([P1, SIGMA_MINUS, P1]))
        with pytest.raises(ValueError):
            classical_jump(3)

    def test_jump_count_follows_weights(self):
        spec, _ = build_classical(ClassicalModelParams.uniform(3))
        assert len(spec.jumps) == 18
        gamma = np.ones((3, 3))
        gamma[1, 2] = 0.0
        spec, _ = build_classical(ClassicalModelParams(3, np.ones(3), gamma=gamma))
        assert len(spec.jumps) == 16

    def test_term_checks_pass(self, classical_params):
        ledger = classical_term_checks(classical_params)
        assert ledger.passed, ledger.format_stats_summary()

    def test_gibbs_state_is_steady_and_balanced(self, classical_params):
        spec, sigma = build_classical(classical_params)
        assert np.isclose(np.trace(sigma).real, 1.0)
        assert np.max(np.abs(assemble(spec).apply(sigma))) <= 1e-10
        assert qdb_residual(spec, sigma, 1.0).holds(1e-10)

    def test_super_term_matches_jump_route(self, classical_params):
        for k, b in [(0, 0), (1, 1), (3, 2)]:
            terms = map_local_jumps(normalize_jumps(classical_term_spec(classical_params, k, b))).terms
            expected = classical_super_term(classical_params, k, b)
            assert np.allclose(terms[0].matrix + terms[1].matrix, expected)

    def test_rate_matrix_is_reversible(self):
        params = ClassicalModelParams.random(5, np.random.default_rng(7), u=2.0)
        chain = classical_rate_matrix(params)
        assert chain.detailed_balance_residual() <= 1e-12
        assert chain.stationarity_residual() <= 1e-12
        assert np.isclose(chain.stationary.sum(), 1.0)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_unique_steady_state(self, n):
        report = uniqueness_report(ClassicalModelParams.uniform(n))
        assert report.kernel_dim == 1
        assert report.passed, report.ledger.format_stats_summary()
        assert report.dominance_margin > 0

    def test_parameters_are_validated(self):
        with pytest.raises(ValueError):
            ClassicalModelParams.uniform(2)
        with pytest.raises(ValueError):
            ClassicalModelParams(4, np.ones(4), gamma=np.ones((4, 2)))
        with pytest.raises(ValueError):
            ClassicalModelParams(4, np.ones(4), gamma=-np.ones((4, 3)))
        with pytest.raises(ValueError):
            FermionParams(4, (1.0, 1.0), (2.0, 0.5))
        with pytest.raises(ValueError):
            FermionParams(2)


class TestFermionicModel:
    def test_mode_rates_and_gap(self, fermion_params):
        report = fermionic_modes(fermion_params)
        assert np.allclose(report.d_in, [3.0, 1.0, 3.0, 5.0])
        assert np.allclose(report.d_out, [2.0, 1.0, 2.0, 3.0])
        assert np.isclose(report.gap, 1.0)
        assert not report.gapless

    def test_many_body_gap_matches_modes(self, fermion_params):
        spec = build_fermionic_manybody(fermion_params)
        report = spectrum_and_gap(assemble(spec))
        assert abs(report.gap - 1.0) <= 1e-8
        assert report.steady_state_count == 1

    def test_gaussian_state_is_steady_and_balanced(self, fermion_params):
        spec = build_fermionic_manybody(fermion_params)
        sigma = gaussian_steady_state(fermion_params)
        assert np.max(np.abs(assemble(spec).apply(sigma))) <= 1e-10
        assert qdb_residual(spec, sigma, 1.0).holds(1e-9)
        report = fermionic_modes(fermion_params)
        assert np.allclose(mode_occupations(sigma, fermion_params.model()), report.occupations)

    def test_mode_form_matches_site_form(self, fermion_params, rng):
        spec = build_fermionic_manybody(fermion_params)
        rho = random_density_matrix(16, rng)
        assert np.allclose(fermionic_lindbladian_apply(fermion_params, rho), spec.apply(rho))

    def test_jordan_wigner_anticommutation(self):
        a = jordan_wigner(3)
        identity = np.eye(8)
        for i in range(3):
            for j in range(3):
                assert np.allclose(a[i] @ a[j].conj().T + a[j].conj().T @ a[i], identity * (i == j))
                assert np.allclose(a[i] @ a[j] + a[j] @ a[i], 0)

    def test_hopping_read_off_super_hamiltonian(self, fermion_params):
        model = fermion_params.model()
        spec = build_fermionic_manybody(model)
        H = map_dense(spec, gaussian_steady_state(model)).matrix
        assert np.allclose(hopping_coefficients(H, 4), model.hopping(), atol=1e-8)

    def test_joint_diagonalization_from_matrices(self, fermion_params):
        reference = fermion_params.model()
        model = SingleParticleModel.from_matrices(circulant(4, 3.0, 1.0), circulant(4, 2.0, 0.5))
        assert np.allclose(model.hopping(), reference.hopping())
        assert np.allclose(np.sort(model.d_in * model.d_out), np.sort(reference.d_in * reference.d_out))
        with pytest.raises(NotQDBError):
            SingleParticleModel.from_matrices(np.diag([1.0, 2.0, 3.0]), circulant(3, 2.0, 0.5))

    def test_gapped_hopping_decays_within_bound(self):
        report = fermionic_super_h_coeffs(FermionParams(40, (3.0, 1.0), (2.0, 0.5)))
        assert report.bound_applicable
        assert report.bound_holds
        assert report.worst_ratio <= 1.0
        assert report.profile.rate > 0

    def test_gapless_hopping_decays_algebraically(self):
        report = fermionic_super_h_coeffs(FermionParams(100, (3.0, 1.0), (2.0, 1.0)))
        assert not report.bound_applicable
        assert report.bound_holds is None
        assert report.profile.preferred_fit == "polynomial"
