"""
Super-Hamiltonians 𝓗 = −Γ_s^{-1/2} ∘ 𝓛 ∘ Γ_s^{1/2} built three ways (dense
conjugation, paired local jumps, Hermitian coefficient frame), their
verification, and the locality of (C C̄)^{1/2}.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from lindblad_superham.core.errors import ApproximationError, CheckLedger, MappingPreconditionError
from lindblad_superham.core.lindblad import LindbladSpec, SuperOpLike, as_superop
from lindblad_superham.core.operators import (
    LatticeGeometry,
    embed_superop,
    general_spectrum,
    hermitian_power,
    hermitian_residual,
    operator_norm,
    vec,
)
from lindblad_superham.core.qdb import (
    CoefficientMatrix,
    StatePowers,
    commutator_check,
    frame_superop,
    gamma_superop,
    qdb_residual,
)

ROUTES = ('dense', 'jumps', 'frame')
# Tags used in published model descriptions for the jump and frame constructions.
ROUTE_ALIASES = {'thm31': 'jumps', 'thm32': 'frame'}
EIGEN_CUTOFF_REL = 1e-10
ROOT_CUTOFF_REL = 1e-12
ENTRY_FLOOR = 1e-14
NORM_TOL = 1e-10


def resolve_route(name: str) -> str:
    """Canonical route for a route name or alias."""
    route = ROUTE_ALIASES.get(name, name)
    if route not in ROUTES:
        raise ValueError(f"Unknown route '{name}' (choose from {', '.join(ROUTES + tuple(ROUTE_ALIASES))})")
    return route


@dataclass(frozen=True)
class SuperTerm:
    """Local piece of a super-Hamiltonian acting on the operators of `sites`."""
    sites: Tuple[int, ...]
    matrix: np.ndarray = field(repr=False)
    label: str = ""

    def full(self, lattice: LatticeGeometry, sparse_output: bool = False):
        return embed_superop(self.matrix, self.sites, lattice, sparse_output=sparse_output)


@dataclass(frozen=True)
class FrameTerm:
    """Coefficient of P_a ρ P_b in a frame-built super-Hamiltonian."""
    a: int
    b: int
    support: Tuple[int, ...]
    hopping: complex


@dataclass(frozen=True)
class SuperHamiltonian:
    matrix: np.ndarray = field(repr=False)
    route: str
    lattice: LatticeGeometry
    terms: Tuple = field(default=(), repr=False)
    provenance: str = ""

    def hermitian_residual(self) -> float:
        return hermitian_residual(self.matrix) / max(operator_norm(self.matrix), np.finfo(float).tiny)


def map_dense(target: SuperOpLike, sigma: np.ndarray, s: float = 1.0, qdb_tol: float = 1e-8) -> SuperHamiltonian:
    S = as_superop(target)
    residual = qdb_residual(S, sigma, s)
    if residual.qdb1 > qdb_tol:
        logging.warning(f"⚠️  Mapping a generator that violates QDB at s={s} (residual {residual.qdb1:.3e})")
    powers = StatePowers(sigma)
    matrix = -gamma_superop(powers, s, -0.5) @ S.matrix @ gamma_superop(powers, s, 0.5)
    return SuperHamiltonian(matrix, 'dense', S.lattice, provenance=f"{S.provenance} (s={s})")


def jump_term_superop(L: np.ndarray, weight: float, partner_weight: float) -> np.ndarray:
    """
    Matrix of ρ ↦ −(√(c c') L ρ L† − (c/2){L†L, ρ}) on the operators of L's support.
    """
    L = np.asarray(L, dtype=complex)
    LdL = L.conj().T @ L
    identity = np.eye(L.shape[0])
    return -(np.sqrt(weight * partner_weight) * np.kron(L, L.conj())
             - 0.5 * weight * (np.kron(LdL, identity) + np.kron(identity, LdL.T)))


def _check_pairing(spec: LindbladSpec, tol: float) -> None:
    for index, term in enumerate(spec.jumps):
        if term.partner is None:
            raise MappingPreconditionError(f"Missing adjoint pairing for jump {index} ({term.label})")
        partner = term.partner
        if not 0 <= partner < len(spec.jumps) or spec.jumps[partner].partner != index:
            raise MappingPreconditionError(f"Pairing of jump {index} is not an involution")
        gap = np.max(np.abs(spec.full_jump(partner) - spec.full_jump(index).conj().T))
        if gap > tol:
            raise MappingPreconditionError(f"Jump {partner} is not the adjoint of jump {index} (gap {gap:.2e})")


def _check_normalized(spec: LindbladSpec, tol: float) -> None:
    for index, term in enumerate(spec.jumps):
        norm = float(np.vdot(term.matrix, term.matrix).real)
        if abs(norm - 1.0) > tol:
            raise MappingPreconditionError(
                f"Jump {index} ({term.label}) has ⟨L,L⟩ = {norm:.6g} on its support; "
                "rescale with normalize_jumps first")


def map_local_jumps(spec: LindbladSpec, rank_tol: float = 1e-10, pair_tol: float = 1e-10,
                    norm_tol: float = NORM_TOL) -> SuperHamiltonian:
    """
    Super-Hamiltonian from paired, linearly independent jumps with no
    coherent part; each jump contributes one local term on its own support.
    Jumps must have unit Hilbert-Schmidt norm on their support.
    """
    if spec.hamiltonian:
        raise MappingPreconditionError("Generator has a Hamiltonian part; the jump route needs H = 0")
    lattice = spec.lattice
    N = lattice.dim
    if not spec.jumps:
        return SuperHamiltonian(np.zeros((N * N, N * N), dtype=complex), 'jumps', lattice, (), spec.name)

    _check_pairing(spec, pair_tol)
    _check_normalized(spec, norm_tol)
    gram_rows = np.array([vec(spec.full_jump(j)) for j in range(len(spec.jumps))])
    singular = la.svdvals(gram_rows)
    if singular[-1] <= rank_tol * singular[0]:
        raise MappingPreconditionError(
            f"Jump operators are linearly dependent (Gram condition {singular[-1] / singular[0]:.2e})")

    terms: List[SuperTerm] = []
    matrix = np.zeros((N * N, N * N), dtype=complex)
    for term in spec.jumps:
        partner_weight = spec.jumps[term.partner].weight
        local = SuperTerm(term.sites, jump_term_superop(term.matrix, term.weight, partner_weight), term.label)
        terms.append(local)
        matrix += local.full(lattice)
    return SuperHamiltonian(matrix, 'jumps', lattice, tuple(terms), spec.name)


def map_basis(C: CoefficientMatrix, comm_tol: float = 1e-9, tol: float = 1e-9) -> SuperHamiltonian:
    """
    Super-Hamiltonian from a GKS matrix over a Hermitian frame:
    −Σ_ab ((C C̄)^{1/2}_ab P_a ρ P_b − ½ C_ab {P_b P_a, ρ}).
    """
    K = C.matrix
    residual = commutator_check(K)
    if residual > comm_tol:
        raise MappingPreconditionError(f"[C,C*] ≠ 0 (relative residual {residual:.3e} > {comm_tol:.1e})")
    scale = max(1.0, float(np.max(np.abs(K))))
    if not C.is_psd(tol):
        raise MappingPreconditionError(f"C is not PSD (smallest eigenvalue {C.min_eigenvalue():.3e})")
    if C.hamiltonian_norm() > tol * scale:
        raise MappingPreconditionError(f"Coherent part of norm {C.hamiltonian_norm():.3e} present")
    if C.trace_residual > tol * scale:
        raise MappingPreconditionError(f"Coefficient data is not trace preserving ({C.trace_residual:.3e})")

    elements = C.elements()
    if any(hermitian_residual(P) > 1e-10 for P in elements):
        raise MappingPreconditionError("Frame elements must be Hermitian")

    hopping = hopping_matrix(C)
    weighted = np.tensordot(K.T, elements, axes=1)
    X = np.einsum('bij,bjk->ik', elements, weighted)
    N = elements.shape[1]
    identity = np.eye(N)
    matrix = -(frame_superop(hopping, elements) - 0.5 * (np.kron(X, identity) + np.kron(identity, X.T)))

    terms = []
    supports = C.supports
    if supports is not None:
        rows, cols = np.nonzero(np.abs(hopping) > ENTRY_FLOOR * max(float(np.max(np.abs(hopping))), 1e-300))
        terms = [FrameTerm(int(a), int(b), tuple(sorted(set(supports[a]) | set(supports[b]))), complex(hopping[a, b]))
                 for a, b in zip(rows, cols)]
    return SuperHamiltonian(matrix, 'frame', LatticeGeometry.for_dim(N), tuple(terms),
                            f"frame of {len(elements)} elements")


def hopping_matrix(C: CoefficientMatrix) -> np.ndarray:
    """
    (C C̄)^{1/2} as a Hermitian PSD matrix, via C^{1/2} C̄ C^{1/2}.
    Rounding eigenvalues on the kernel of C are dropped before each root.
    """
    root = hermitian_power(C.matrix, 0.5, rel_cutoff=ROOT_CUTOFF_REL)
    return hermitian_power(root @ C.matrix.conj() @ root, 0.5, rel_cutoff=ROOT_CUTOFF_REL)


def spectrum_distance(first: np.ndarray, second: np.ndarray) -> float:
    """Largest gap of a greedy nearest-neighbour matching between two multisets."""
    first = np.asarray(first, dtype=complex)
    second = np.asarray(second, dtype=complex)
    if first.size != second.size:
        return float('inf')
    first = first[np.lexsort((first.imag, first.real))]
    second = second[np.lexsort((second.imag, second.real))]
    used = np.zeros(second.size, dtype=bool)
    worst = 0.0
    for value in first:
        gaps = np.where(used, np.inf, np.abs(second - value))
        pick = int(np.argmin(gaps))
        used[pick] = True
        worst = max(worst, float(gaps[pick]))
    return worst


@dataclass(frozen=True)
class MappingVerification:
    spectrum_distance: float
    kernel_residual: float
    hermitian_residual: float
    psd_residual: float
    gap_hamiltonian: float
    gap_lindbladian: float
    ledger: CheckLedger = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.ledger.passed


def _smallest_nonzero(values: np.ndarray, rel: float = 1e-8) -> float:
    values = np.asarray(values)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    nonzero = values[np.abs(values) > rel * scale]
    return float(np.min(np.abs(nonzero.real))) if nonzero.size else 0.0


def verify_mapping(target: SuperOpLike, H: SuperHamiltonian, sigma: np.ndarray, tol: float = 1e-8) -> MappingVerification:
    """Report-only comparison of a super-Hamiltonian with its generator."""
    S = as_superop(target)
    ledger = CheckLedger(f"verify {H.route}")

    spec_h = general_spectrum(H.matrix)
    spec_s = general_spectrum(S.matrix)
    scale = max(1.0, float(np.max(np.abs(spec_s))))
    distance = spectrum_distance(spec_h, -spec_s)
    ledger.record("spectrum_negation", distance, tol * scale, H.route)

    root = vec(hermitian_power(sigma, 0.5))
    kernel = float(np.linalg.norm(H.matrix @ root) / np.linalg.norm(root))
    ledger.record("kernel_sqrt_sigma", kernel, tol * scale, H.route)

    herm = H.hermitian_residual()
    ledger.record("hermitian", herm, tol, H.route)

    symmetric = (H.matrix + H.matrix.conj().T) / 2
    eigenvalues = la.eigvalsh(symmetric)
    psd = max(0.0, -float(eigenvalues.min())) / scale
    ledger.record("psd", psd, tol, H.route)

    gap_h = _smallest_nonzero(eigenvalues)
    gap_s = _smallest_nonzero(spec_s)
    ledger.record("gap_match", abs(gap_h - gap_s), tol * scale, H.route)
    return MappingVerification(distance, kernel, herm, psd, gap_h, gap_s, ledger)


def _fit_line(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float, float]:
    """Least-squares line; returns slope, intercept, R² and RMS residual."""
    slope, intercept = np.polyfit(x, y, 1)
    predicted = slope * x + intercept
    ss_res = float(np.sum((y - predicted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2, float(np.sqrt(ss_res / len(x)))


def decay_bound_curve(distances: np.ndarray, lam_min: float, lam_max: float, k: int) -> np.ndarray:
    """e·√λ_max·exp(−r λ_min / (2 k λ_max)), the polynomial-approximation locality bound."""
    distances = np.asarray(distances, dtype=float)
    return np.e * np.sqrt(lam_max) * np.exp(-distances * lam_min / (2 * k * lam_max))


@dataclass(frozen=True)
class DecayProfile:
    distances: np.ndarray
    maxima: np.ndarray
    rate: float
    prefactor: float
    fit_residual: float
    exponential_r2: float
    polynomial_exponent: float
    polynomial_r2: float
    lam_min: float
    lam_max: float
    coupling: float
    bound: np.ndarray
    bound_holds: bool
    degenerate: bool
    c1: float = float('nan')
    c2: float = float('nan')

    @property
    def preferred_fit(self) -> str:
        if self.degenerate:
            return "none"
        return "exponential" if self.exponential_r2 >= self.polynomial_r2 else "polynomial"

    def coupling_curve(self, distances: Optional[np.ndarray] = None) -> np.ndarray:
        """Measured c₁·J·exp(−c₂ r λ_min / J²); NaN when J or the fit is unavailable."""
        r = self.distances if distances is None else np.asarray(distances, dtype=float)
        J = self.coupling
        return self.c1 * J * np.exp(-self.c2 * r * self.lam_min / J ** 2)


def decay_profile(M: np.ndarray, supports: Sequence[Sequence[int]], lattice: LatticeGeometry, k: int = 1,
                  coefficients: Optional[np.ndarray] = None, fit_max: Optional[int] = None) -> DecayProfile:
    """
    Largest |M_ab| per support distance, exponential and power-law fits over
    r = 1..⌊n/4⌋ (at least 2), and the locality bound for M = (M M†)^{1/2}.

    With `coefficients` C (M = (C C̄)^{1/2}), J = max|C_ab| and the exponential
    fit is restated as c₁·J·exp(−c₂ r λ_min / J²), λ_min the smallest nonzero
    eigenvalue of M M†.
    """
    M = np.asarray(M)
    if len(supports) != M.shape[0]:
        raise ValueError(f"{len(supports)} supports given for a {M.shape[0]}-index matrix")
    distances = np.arange(lattice.n // 2 + 1)
    maxima = np.zeros(distances.size)
    pair_dist = np.array([[lattice.support_dist(sa, sb) for sb in supports] for sa in supports])
    magnitude = np.abs(M)
    for r in distances:
        mask = pair_dist == r
        if mask.any():
            maxima[r] = float(magnitude[mask].max())

    product = (M @ M.conj().T + (M @ M.conj().T).conj().T) / 2
    eigenvalues = la.eigvalsh(product)
    lam_max = float(max(eigenvalues.max(), 0.0))
    nonzero = eigenvalues[eigenvalues > EIGEN_CUTOFF_REL * lam_max]
    lam_min = float(nonzero.min()) if nonzero.size else 0.0
    bound = decay_bound_curve(distances, lam_min, lam_max, k) if lam_max > 0 else np.zeros(distances.size)
    holds = bool(np.all(magnitude <= bound[pair_dist] + 1e-12)) if lam_max > 0 else True
    coupling = float(np.max(np.abs(coefficients))) if coefficients is not None else float('nan')

    top = fit_max or max(2, lattice.n // 4)
    fit_r = distances[(distances >= 1) & (distances <= top)]
    fit_r = fit_r[maxima[fit_r] > ENTRY_FLOOR]
    degenerate = fit_r.size < 2
    if degenerate:
        logging.info("Decay profile degenerate: no entries above the floor at r ≥ 1")
        rate = prefactor = residual = exp_r2 = exponent = poly_r2 = float('nan')
    else:
        logs = np.log(maxima[fit_r])
        slope, intercept, exp_r2, residual = _fit_line(fit_r.astype(float), logs)
        rate, prefactor = -slope, float(np.exp(intercept))
        poly_slope, _, poly_r2, _ = _fit_line(np.log(fit_r.astype(float)), logs)
        exponent = -poly_slope

    c1 = c2 = float('nan')
    if not degenerate and coupling > 0 and lam_min > 0:
        c1 = prefactor / coupling
        c2 = rate * coupling ** 2 / lam_min
        logging.debug(f"Decay constants against J={coupling:.3e}: c1={c1:.3e}, c2={c2:.3e}")

    return DecayProfile(distances, maxima, rate, prefactor, residual, exp_r2, exponent, poly_r2,
                        lam_min, lam_max, coupling, bound, holds, degenerate, c1, c2)


def _sqrt_series(degree: int) -> np.ndarray:
    """Taylor coefficients of (1+w)^{-1/2}: c_j = C(2j, j)(−1/4)^j."""
    c = np.ones(degree)
    for j in range(1, degree):
        c[j] = -c[j - 1] * (2 * j - 1) / (2 * j)
    return c


def _spectral_window(A: np.ndarray) -> Tuple[np.ndarray, float, float]:
    eigenvalues = la.eigvalsh((A + A.conj().T) / 2)
    if eigenvalues.min() < -1e-10 * max(1.0, abs(eigenvalues.max())):
        raise ValueError(f"Matrix is not PSD (eigenvalue {eigenvalues.min():.3e})")
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    lam_max = float(eigenvalues.max())
    nonzero = eigenvalues[eigenvalues > EIGEN_CUTOFF_REL * lam_max]
    return eigenvalues, float(nonzero.min()) if nonzero.size else 0.0, lam_max


@dataclass(frozen=True)
class SqrtPolyResult:
    value: np.ndarray = field(repr=False)
    degree: int
    error: float
    bound: float
    lam_min: float
    lam_max: float

    @property
    def within_bound(self) -> bool:
        return self.error <= self.bound * (1 + 1e-6) + 1e-12 * np.sqrt(self.lam_max)


def sqrt_poly(A: np.ndarray, m: int) -> SqrtPolyResult:
    """
    P_m(A) = A·Q_m(A), Q_m the degree m−1 truncation of λ_max^{-1/2}(1 + (A/λ_max − 1))^{-1/2},
    evaluated by Horner's rule, with its distance to √A. Raises ApproximationError when that
    distance exceeds √λ_max e^{−m λ_min/λ_max} by more than a 1e-6 relative margin.
    """
    if m < 1:
        raise ValueError(f"Polynomial degree must be at least 1, got {m}")
    A = np.asarray(A, dtype=complex)
    _, lam_min, lam_max = _spectral_window(A)
    dim = A.shape[0]
    if lam_max == 0:
        return SqrtPolyResult(np.zeros_like(A), m, 0.0, 0.0, 0.0, 0.0)

    coefficients = _sqrt_series(m)
    W = A / lam_max - np.eye(dim)
    Q = coefficients[-1] * np.eye(dim, dtype=complex)
    for c in coefficients[-2::-1]:
        Q = Q @ W + c * np.eye(dim)
    value = A @ Q / np.sqrt(lam_max)

    difference = hermitian_power(A, 0.5) - value
    error = float(np.max(np.abs(la.eigvalsh((difference + difference.conj().T) / 2))))
    bound = float(np.sqrt(lam_max) * np.exp(-m * lam_min / lam_max))
    result = SqrtPolyResult(value, m, error, bound, lam_min, lam_max)
    if not result.within_bound:
        raise ApproximationError(f"Degree {m} square-root error {error:.3e} exceeds the bound {bound:.3e}")
    return result


@dataclass(frozen=True)
class SqrtPolyCurve:
    degrees: np.ndarray
    errors: np.ndarray
    bounds: np.ndarray
    rate: float
    lam_min: float
    lam_max: float


def sqrt_poly_errors(A: np.ndarray, degrees: Sequence[int]) -> SqrtPolyCurve:
    """Spectral error max_i |√λ_i − P_m(λ_i)| for each degree, with the fitted decay rate."""
    eigenvalues, lam_min, lam_max = _spectral_window(np.asarray(A, dtype=complex))
    degrees = np.asarray(list(degrees), dtype=int)
    if degrees.min() < 1:
        raise ValueError("Polynomial degrees must be at least 1")
    z = eigenvalues / lam_max - 1.0
    errors = []
    for m in degrees:
        series = np.polynomial.polynomial.polyval(z, _sqrt_series(int(m)))
        errors.append(float(np.max(np.abs(np.sqrt(eigenvalues) - eigenvalues * series / np.sqrt(lam_max)))))
    errors = np.array(errors)
    bounds = np.sqrt(lam_max) * np.exp(-degrees * lam_min / lam_max)
    usable = errors > 1e-15 * np.sqrt(lam_max)
    rate = float('nan')
    if usable.sum() >= 2:
        rate = -float(np.polyfit(degrees[usable], np.log(errors[usable]), 1)[0])
    return SqrtPolyCurve(degrees, errors, bounds, rate, lam_min, lam_max)
