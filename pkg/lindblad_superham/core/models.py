"""
The two solvable families: a classical-like ring with occupation-dependent
flips, and quadratic fermions driven by commuting circulant rate matrices.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from lindblad_superham.core.errors import (
    CheckLedger,
    DimensionError,
    NotQDBError,
    SingularStateError,
)
from lindblad_superham.core.lindblad import JumpTerm, LindbladSpec, assemble_sparse
from lindblad_superham.core.operators import PAULI, SIGMA_MINUS, LatticeGeometry, kron_all
from lindblad_superham.core.qdb import qdb_residual
from lindblad_superham.core.super_hamiltonian import DecayProfile, decay_profile

MAX_CLASSICAL_SITES = 14
MAX_UNIQUENESS_SITES = 6
MAX_TERM_QDB_SITES = 4
MAX_FERMION_MODES = 7
GAPLESS_TOL = 1e-10
PSD_TOL = 1e-10


# ---------------------------------------------------------------------------
# Classical-like model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalModelParams:
    """
    Ring of n occupation sites with energies ε_k, chemical potential μ,
    nearest-neighbour interaction u and flip weights γ[k, b], b = x_{k-1} + x_{k+1}.
    """
    n: int
    eps: np.ndarray
    mu: float = 0.0
    u: float = 0.5
    beta: float = 1.0
    gamma: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"Classical model needs a ring of at least 3 sites, got n={self.n}")
        eps = np.broadcast_to(np.asarray(self.eps, dtype=float), (self.n,)).copy()
        gamma = np.ones((self.n, 3)) if self.gamma is None else np.asarray(self.gamma, dtype=float)
        if gamma.shape != (self.n, 3):
            raise ValueError(f"Weights must have shape ({self.n}, 3), got {gamma.shape}")
        if np.any(gamma < 0):
            raise ValueError("Flip weights must be non-negative")
        object.__setattr__(self, 'eps', eps)
        object.__setattr__(self, 'gamma', gamma)
        object.__setattr__(self, 'mu', float(self.mu))
        object.__setattr__(self, 'u', float(self.u))
        object.__setattr__(self, 'beta', float(self.beta))

    @classmethod
    def uniform(cls, n: int, eps: float = 1.0, mu: float = 0.0, u: float = 0.5, beta: float = 1.0):
        return cls(n, np.full(n, eps), mu, u, beta)

    @classmethod
    def alternating(cls, n: int, eps: Sequence[float] = (1.0, 10.0), mu: float = 0.0, u: float = 0.5,
                    beta: float = 1.0):
        return cls(n, np.array([eps[k % len(eps)] for k in range(n)]), mu, u, beta)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, low: float = 0.0, high: float = 1.0, mu: float = 0.0,
               u: float = 0.5, beta: float = 1.0):
        return cls(n, rng.uniform(low, high, size=n), mu, u, beta)

    @property
    def lattice(self) -> LatticeGeometry:
        return LatticeGeometry(self.n)

    def omega(self, k: int, b: int) -> float:
        """ω_{k,b} = −(ε_k − μ) − u·b."""
        return -(self.eps[k] - self.mu) - self.u * b

    def support(self, k: int) -> Tuple[int, int, int]:
        return ((k - 1) % self.n, k, (k + 1) % self.n)


def classical_jump(b: int) -> np.ndarray:
    """σ⁻ on the middle site, projected on neighbour occupations summing to b."""
    if b not in (0, 1, 2):
        raise ValueError(f"Neighbour occupation must be 0, 1 or 2, got {b}")
    projectors = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    L = np.zeros((8, 8), dtype=complex)
    for left in (0, 1):
        right = b - left
        if right in (0, 1):
            L += kron_all([projectors[left], SIGMA_MINUS, projectors[right]])
    return L


def configurations(n: int) -> np.ndarray:
    """All bit strings as rows, site 0 the most significant bit."""
    index = np.arange(2 ** n)
    return (index[:, None] >> (n - 1 - np.arange(n))) & 1


def classical_energies(params: ClassicalModelParams) -> np.ndarray:
    """E_x = Σ (ε_i − μ) x_i + u Σ x_i x_{i+1} around the ring."""
    if params.n > MAX_CLASSICAL_SITES:
        raise DimensionError(f"2^{params.n} configurations exceed the cap of {MAX_CLASSICAL_SITES} sites")
    x = configurations(params.n)
    return x @ (params.eps - params.mu) + params.u * np.sum(x * np.roll(x, -1, axis=1), axis=1)


def gibbs_weights(params: ClassicalModelParams) -> np.ndarray:
    """e^{−βE_x}/Z for every configuration."""
    E = classical_energies(params)
    weights = np.exp(-params.beta * (E - E.min()))
    return weights / weights.sum()


def classical_gibbs(params: ClassicalModelParams) -> np.ndarray:
    return np.diag(gibbs_weights(params)).astype(complex)


def build_classical(params: ClassicalModelParams) -> Tuple[LindbladSpec, np.ndarray]:
    """Jump form of the classical-like generator and its Gibbs steady state."""
    jumps = []
    for k in range(params.n):
        for b in range(3):
            gamma = params.gamma[k, b]
            if gamma == 0:
                logging.debug(f"Skipping L[{k},{b}]: zero weight")
                continue
            omega = params.omega(k, b)
            L = classical_jump(b)
            first = len(jumps)
            jumps.append(JumpTerm(L, params.support(k), gamma * np.exp(-params.beta * omega / 2),
                                  partner=first + 1, label=f"L[{k},{b}]"))
            jumps.append(JumpTerm(L.conj().T, params.support(k), gamma * np.exp(params.beta * omega / 2),
                                  partner=first, label=f"L[{k},{b}]†"))
    spec = LindbladSpec(params.lattice, tuple(jumps), k=3, name=f"classical n={params.n}")
    sigma = classical_gibbs(params)
    logging.info(f"Classical model: {len(jumps)} jumps on {params.n} sites (β={params.beta}, u={params.u})")
    return spec, sigma


def classical_term_spec(params: ClassicalModelParams, k: int, b: int) -> LindbladSpec:
    """The single pair 𝓛_{k,b} (both directions) as its own generator."""
    spec, _ = build_classical(params)
    wanted = {f"L[{k},{b}]", f"L[{k},{b}]†"}
    jumps = [term for term in spec.jumps if term.label in wanted]
    if not jumps:
        raise ValueError(f"Term ({k}, {b}) has zero weight")
    return LindbladSpec(spec.lattice, (JumpTerm(jumps[0].matrix, jumps[0].sites, jumps[0].weight, 1, jumps[0].label),
                                       JumpTerm(jumps[1].matrix, jumps[1].sites, jumps[1].weight, 0, jumps[1].label)),
                        k=3, name=f"L[{k},{b}]")


def classical_term_checks(params: ClassicalModelParams, s_values: Sequence[float] = (0.0, 0.5, 1.0),
                          tol: float = 1e-9, qdb_max_sites: int = MAX_TERM_QDB_SITES) -> CheckLedger:
    """
    Per-term checks: Bohr frequency σ L σ^{-1} = e^{−βω} L, frustration freeness
    𝓛_{k,b}(σ) = 0, and (on small rings) the local QDB residual for each s.
    """
    ledger = CheckLedger(f"classical terms n={params.n}")
    sigma = classical_gibbs(params)
    inverse = np.diag(1.0 / np.diag(sigma).real)
    for k in range(params.n):
        for b in range(3):
            if params.gamma[k, b] == 0:
                continue
            subject = f"L[{k},{b}]"
            term = classical_term_spec(params, k, b)
            L = term.full_jump(0)
            factor = np.exp(-params.beta * params.omega(k, b))
            residual = np.max(np.abs(sigma @ L @ inverse - factor * L)) / max(1.0, factor)
            ledger.record("bohr_frequency", float(residual), tol, subject)
            ledger.record("frustration_free", float(np.max(np.abs(term.apply(sigma)))), tol, subject)
            if params.n <= qdb_max_sites:
                for s in s_values:
                    ledger.record("local_qdb", qdb_residual(term, sigma, s).qdb1, tol, f"{subject} s={s}")
    return ledger


def classical_super_term(params: ClassicalModelParams, k: int, b: int) -> np.ndarray:
    """
    γ_{k,b}·𝓗_{k,b} on the operators of sites (k−1, k, k+1):
    −(LρL† + L†ρL − (e^{−βω/2}/2){L†L, ρ} − (e^{βω/2}/2){LL†, ρ}).
    """
    L = classical_jump(b)
    Ld = L.conj().T
    w = params.beta * params.omega(k, b)
    identity = np.eye(8)

    def anticommutator(A):
        return np.kron(A, identity) + np.kron(identity, A.T)

    return -params.gamma[k, b] * (np.kron(L, L.conj()) + np.kron(Ld, Ld.conj())
                                  - np.exp(-w / 2) / 2 * anticommutator(Ld @ L)
                                  - np.exp(w / 2) / 2 * anticommutator(L @ Ld))


@dataclass(frozen=True)
class RateMatrix:
    """Generator of the induced Markov chain: rates[x', x] = f_{x→x'} (CSR), exits[x] = g_x."""
    rates: sparse.csr_matrix = field(repr=False)
    exits: np.ndarray = field(repr=False)
    stationary: np.ndarray = field(repr=False)

    @property
    def generator(self) -> sparse.csr_matrix:
        return (self.rates - sparse.diags(self.exits)).tocsr()

    def detailed_balance_residual(self) -> float:
        flux = self.rates.multiply(self.stationary[None, :]).tocsr()
        difference = abs(flux - flux.T)
        return float(difference.max()) if difference.nnz else 0.0

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.generator @ self.stationary)))


def classical_rate_matrix(params: ClassicalModelParams) -> RateMatrix:
    """Single-flip rates γ e^{∓βω/2} with b read off the current neighbours."""
    if params.n > MAX_CLASSICAL_SITES:
        raise DimensionError(f"2^{params.n} states exceed the cap of {MAX_CLASSICAL_SITES} sites")
    n = params.n
    x = configurations(n)
    size = 2 ** n
    source = np.arange(size)
    rows, cols, values = [], [], []
    for k in range(n):
        b = x[:, (k - 1) % n] + x[:, (k + 1) % n]
        omega = -(params.eps[k] - params.mu) - params.u * b
        gamma = params.gamma[k, b]
        occupied = x[:, k] == 1
        f = np.where(occupied, gamma * np.exp(-params.beta * omega / 2), gamma * np.exp(params.beta * omega / 2))
        rows.append(source ^ (1 << (n - 1 - k)))
        cols.append(source)
        values.append(f)
    rates = sparse.csr_matrix((np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(size, size))
    rates.eliminate_zeros()
    exits = np.asarray(rates.sum(axis=0)).ravel()
    return RateMatrix(rates, exits, gibbs_weights(params))


@dataclass(frozen=True)
class UniquenessReport:
    kernel_dim: int
    min_propagator_entry: float
    dominance_margin: float
    offdiagonal_max_real: float
    ledger: CheckLedger = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.ledger.passed


def _diagonal_indices(N: int) -> np.ndarray:
    return np.arange(N) * (N + 1)


def uniqueness_report(params: ClassicalModelParams, t: float = 1.0,
                      max_sites: int = MAX_UNIQUENESS_SITES) -> UniquenessReport:
    """
    Steady-state uniqueness evidence: positivity of the diagonal-sector
    propagator at time t, a one-dimensional kernel, column dominance on the
    coherence sector and a strictly negative coherence spectrum.
    Small t makes the positivity check fail numerically even when the chain is connected.
    """
    if params.n > max_sites:
        raise DimensionError(f"Uniqueness report is capped at {max_sites} sites, got {params.n}")
    spec, _ = build_classical(params)
    S = assemble_sparse(spec)
    N = params.lattice.dim
    ledger = CheckLedger(f"uniqueness n={params.n}")

    diagonal = _diagonal_indices(N)
    block = S[diagonal][:, diagonal].toarray()
    P = la.expm(block * t)
    min_entry = float(P.real.min())
    ledger.record_flag("propagator_positive", min_entry > 0, "diagonal", detail=f"t={t}", value=min_entry)

    is_diagonal = np.zeros(N * N, dtype=bool)
    is_diagonal[diagonal] = True
    coherence = np.flatnonzero(~is_diagonal)
    A = S[coherence][:, coherence].tocsc()
    magnitude = abs(A)
    off_sum = np.asarray(magnitude.sum(axis=0)).ravel() - np.abs(A.diagonal())
    margin = float(np.min(-A.diagonal().real - off_sum))
    ledger.record_flag("column_dominance", margin > 0, "coherences", value=margin)

    pattern = (abs(S) + abs(S).T).tocsr()
    count, labels = connected_components(pattern, directed=False)
    radius = float(abs(S).sum(axis=0).max())
    threshold = 1e-8 * max(radius, np.finfo(float).tiny)
    kernel_dim = 0
    coherence_max = -np.inf
    for component in range(count):
        members = np.flatnonzero(labels == component)
        eigenvalues = la.eigvals(S[members][:, members].toarray())
        kernel_dim += int(np.sum(np.abs(eigenvalues) <= threshold))
        if not is_diagonal[members].any():
            coherence_max = max(coherence_max, float(eigenvalues.real.max()))
    ledger.record_flag("unique_kernel", kernel_dim == 1, "generator", detail=f"{count} blocks", value=kernel_dim)
    ledger.record_flag("coherences_decay", coherence_max < 0, "coherences", value=coherence_max)
    logging.info(f"Uniqueness n={params.n}: kernel {kernel_dim}, coherence max Re {coherence_max:.4f}")
    return UniquenessReport(kernel_dim, min_entry, margin, coherence_max, ledger)


# ---------------------------------------------------------------------------
# Quadratic fermions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FermionParams:
    """Nearest-neighbour circulant rates (γ_0, γ_1) for absorption and emission on a ring."""
    n: int
    gamma_in: Tuple[float, float] = (3.0, 1.0)
    gamma_out: Tuple[float, float] = (2.0, 0.5)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"Circulant rates need a ring of at least 3 sites, got n={self.n}")
        object.__setattr__(self, 'gamma_in', tuple(float(g) for g in self.gamma_in))
        object.__setattr__(self, 'gamma_out', tuple(float(g) for g in self.gamma_out))
        for name, (g0, g1) in (("gamma_in", self.gamma_in), ("gamma_out", self.gamma_out)):
            if g0 < 2 * abs(g1) - PSD_TOL:
                raise ValueError(f"{name}=({g0}, {g1}) is not PSD: need γ_0 ≥ 2|γ_1|")

    def model(self) -> "SingleParticleModel":
        return SingleParticleModel.from_params(self)


def circulant(n: int, g0: float, g1: float) -> np.ndarray:
    """γ_0 on the diagonal, γ_1 on both ring neighbours."""
    shift = np.roll(np.eye(n), 1, axis=1)
    return g0 * np.eye(n) + g1 * (shift + shift.T)


def _check_psd(matrix: np.ndarray, name: str) -> None:
    if np.max(np.abs(matrix - matrix.conj().T)) > PSD_TOL * max(1.0, np.max(np.abs(matrix))):
        raise ValueError(f"{name} is not Hermitian")
    smallest = float(la.eigvalsh(matrix).min())
    if smallest < -PSD_TOL * max(1.0, float(np.max(np.abs(matrix)))):
        raise ValueError(f"{name} is not PSD (eigenvalue {smallest:.3e})")


@dataclass(frozen=True)
class SingleParticleModel:
    """
    Commuting rate matrices γ^in, γ^out with a joint eigenbasis: columns
    u_k of `modes` satisfy γ u_k = d_k u_k.
    """
    gamma_in: np.ndarray = field(repr=False)
    gamma_out: np.ndarray = field(repr=False)
    modes: np.ndarray = field(repr=False)
    d_in: np.ndarray
    d_out: np.ndarray

    @property
    def n(self) -> int:
        return self.gamma_in.shape[0]

    @classmethod
    def from_params(cls, params: FermionParams) -> "SingleParticleModel":
        n = params.n
        k = np.arange(1, n + 1)
        j = np.arange(n)
        modes = np.exp(2j * np.pi * np.outer(j, k) / n) / np.sqrt(n)
        d_in = params.gamma_in[0] + 2 * params.gamma_in[1] * np.cos(2 * np.pi * k / n)
        d_out = params.gamma_out[0] + 2 * params.gamma_out[1] * np.cos(2 * np.pi * k / n)
        return cls(circulant(n, *params.gamma_in), circulant(n, *params.gamma_out), modes,
                   np.clip(d_in, 0.0, None), np.clip(d_out, 0.0, None))

    @classmethod
    def from_matrices(cls, gamma_in, gamma_out, tol: float = 1e-10) -> "SingleParticleModel":
        """Joint diagonalization: eigenvectors of γ^in, refined inside its degenerate clusters by γ^out."""
        A = np.atleast_2d(np.asarray(gamma_in, dtype=complex))
        B = np.atleast_2d(np.asarray(gamma_out, dtype=complex))
        if A.shape != B.shape or A.shape[0] != A.shape[1]:
            raise ValueError(f"Rate matrices must be square and equal in shape, got {A.shape} and {B.shape}")
        _check_psd(A, "gamma_in")
        _check_psd(B, "gamma_out")
        scale = max(1.0, float(np.max(np.abs(A))), float(np.max(np.abs(B))))
        commutator = float(np.max(np.abs(A @ B - B @ A)))
        if commutator > tol * scale ** 2:
            raise NotQDBError(f"γ^in and γ^out do not commute (residual {commutator:.3e})")

        w, U = la.eigh(A)
        cluster_tol = 1e-9 * scale
        start = 0
        while start < len(w):
            stop = start + 1
            while stop < len(w) and w[stop] - w[start] <= cluster_tol:
                stop += 1
            if stop - start > 1:
                block = U[:, start:stop]
                _, R = la.eigh(block.conj().T @ B @ block)
                U[:, start:stop] = block @ R
            start = stop
        d_in = np.clip(np.real(np.einsum('ik,ij,jk->k', U.conj(), A, U)), 0.0, None)
        d_out = np.clip(np.real(np.einsum('ik,ij,jk->k', U.conj(), B, U)), 0.0, None)
        return cls(A, B, U, d_in, d_out)

    def hopping(self) -> np.ndarray:
        """√(γ^in γ^out) through the joint eigenbasis."""
        return (self.modes * np.sqrt(self.d_in * self.d_out)) @ self.modes.conj().T

    def steady_hamiltonian(self) -> np.ndarray:
        """h = U diag(log(d_out/d_in)) U†, the single-particle part of −log σ."""
        if np.any(self.d_in <= 0) or np.any(self.d_out <= 0):
            raise SingularStateError("A mode with zero absorption or emission has no full-rank steady state")
        return (self.modes * np.log(self.d_out / self.d_in)) @ self.modes.conj().T


@dataclass(frozen=True)
class ModeReport:
    d_in: np.ndarray
    d_out: np.ndarray
    energies: np.ndarray
    occupations: np.ndarray
    gap: float
    gapless_in: bool
    gapless_out: bool

    @property
    def gapless(self) -> bool:
        return self.gapless_in or self.gapless_out


def fermionic_modes(model: Union[SingleParticleModel, FermionParams], gapless_tol: float = GAPLESS_TOL) -> ModeReport:
    """Mode rates, energies ε_k = −log(d^in/d^out), occupations and the gap min (d^in + d^out)/2."""
    if isinstance(model, FermionParams):
        model = model.model()
    with np.errstate(divide='ignore'):
        energies = -np.log(model.d_in) + np.log(model.d_out)
    total = model.d_in + model.d_out
    occupations = np.divide(model.d_in, total, out=np.full(total.shape, np.nan), where=total > 0)
    report = ModeReport(model.d_in, model.d_out, energies, occupations, float(total.min() / 2),
                        bool(model.d_in.min() <= gapless_tol), bool(model.d_out.min() <= gapless_tol))
    if report.gapless:
        logging.info(f"Rate matrices are gapless (min d_in={model.d_in.min():.3e}, min d_out={model.d_out.min():.3e})")
    return report


def jordan_wigner(n: int) -> Tuple[np.ndarray, ...]:
    """a_i = Z_0 ⋯ Z_{i−1} σ⁻_i on n qubits."""
    ops = []
    for i in range(n):
        factors = [PAULI['Z']] * i + [SIGMA_MINUS] + [PAULI['I']] * (n - i - 1)
        ops.append(kron_all(factors))
    return tuple(ops)


def mode_operators(model: SingleParticleModel) -> Tuple[np.ndarray, ...]:
    """c_k = Σ_i conj(u_ik) a_i."""
    a = np.array(jordan_wigner(model.n))
    return tuple(np.tensordot(model.modes[:, k].conj(), a, axes=1) for k in range(model.n))


def _as_model(source: Union[SingleParticleModel, FermionParams]) -> SingleParticleModel:
    return source.model() if isinstance(source, FermionParams) else source


def build_fermionic_manybody(source: Union[SingleParticleModel, FermionParams],
                             max_modes: int = MAX_FERMION_MODES) -> LindbladSpec:
    """
    Qubit image of the quadratic generator: jumps c_k† with weight d^in_k and
    c_k with weight d^out_k, paired with each other.
    """
    model = _as_model(source)
    n = model.n
    if n > max_modes:
        raise DimensionError(f"{n} modes exceed the dense cap of {max_modes}")
    sites = tuple(range(n))
    jumps = []
    for k, c in enumerate(mode_operators(model)):
        pair = []
        if model.d_in[k] > 0:
            pair.append((c.conj().T, model.d_in[k], f"c{k}†"))
        if model.d_out[k] > 0:
            pair.append((c, model.d_out[k], f"c{k}"))
        first = len(jumps)
        for offset, (matrix, weight, label) in enumerate(pair):
            partner = first + 1 - offset if len(pair) == 2 else None
            jumps.append(JumpTerm(matrix, sites, weight, partner=partner, label=label))
    logging.info(f"Fermionic model: {n} modes, {len(jumps)} jumps")
    return LindbladSpec(LatticeGeometry(n), tuple(jumps), k=n, name=f"fermionic n={n}")


def fermionic_lindbladian_apply(source: Union[SingleParticleModel, FermionParams], rho: np.ndarray) -> np.ndarray:
    """Σ_ij γ^in_ij (a_i† ρ a_j − ½{a_j a_i†, ρ}) + γ^out_ji (a_i ρ a_j† − ½{a_j† a_i, ρ})."""
    model = _as_model(source)
    a = jordan_wigner(model.n)
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for i in range(model.n):
        ai, adi = a[i], a[i].conj().T
        for j in range(model.n):
            aj, adj = a[j], a[j].conj().T
            g_in, g_out = model.gamma_in[i, j], model.gamma_out[j, i]
            if g_in != 0:
                K = aj @ adi
                out += g_in * (adi @ rho @ aj - 0.5 * (K @ rho + rho @ K))
            if g_out != 0:
                K = adj @ ai
                out += g_out * (ai @ rho @ adj - 0.5 * (K @ rho + rho @ K))
    return out


def gaussian_steady_state(source: Union[SingleParticleModel, FermionParams]) -> np.ndarray:
    """σ ∝ exp(−Σ h_ij a_i† a_j)."""
    model = _as_model(source)
    h = model.steady_hamiltonian()
    a = jordan_wigner(model.n)
    H = sum(h[i, j] * a[i].conj().T @ a[j] for i in range(model.n) for j in range(model.n))
    H = (H + H.conj().T) / 2
    w, V = la.eigh(H)
    weights = np.exp(-(w - w.min()))
    return (V * (weights / weights.sum())) @ V.conj().T


def mode_occupations(sigma: np.ndarray, model: SingleParticleModel) -> np.ndarray:
    """Tr(σ c_k† c_k) per mode."""
    return np.array([np.trace(sigma @ c.conj().T @ c).real for c in mode_operators(model)])


def hopping_decay_bound(params: FermionParams, distances: np.ndarray) -> Optional[np.ndarray]:
    """
    2·(√γ^in_0/(1−r_in)²)(√γ^out_0/(1−r_out)²)·(r_in^{d/2} + r_out^{d/2}) with r = 2|γ_1|/γ_0;
    None when either ratio reaches 1.
    """
    (i0, i1), (o0, o1) = params.gamma_in, params.gamma_out
    r_in, r_out = 2 * abs(i1) / i0, 2 * abs(o1) / o0
    if r_in >= 1 or r_out >= 1:
        return None
    prefactor = 2 * np.sqrt(i0) / (1 - r_in) ** 2 * np.sqrt(o0) / (1 - r_out) ** 2
    distances = np.asarray(distances, dtype=float)
    return prefactor * (r_in ** (distances / 2) + r_out ** (distances / 2))


@dataclass(frozen=True)
class HoppingReport:
    matrix: np.ndarray = field(repr=False)
    bound: Optional[np.ndarray] = field(repr=False)
    bound_applicable: bool
    bound_holds: Optional[bool]
    worst_ratio: float
    profile: DecayProfile = field(repr=False)


def fermionic_super_h_coeffs(params: FermionParams, fit_max: Optional[int] = None) -> HoppingReport:
    """
    √(γ^in γ^out) through the DFT, checked entrywise against the circle-distance
    bound when both rate matrices are gapped, and its decay profile.
    """
    model = params.model()
    M = model.hopping()
    if np.max(np.abs(M.imag)) < 1e-12 * max(1.0, np.max(np.abs(M))):
        M = M.real
    lattice = LatticeGeometry(params.n)
    idx = np.arange(params.n)
    gap = np.abs(idx[:, None] - idx[None, :])
    distance = np.minimum(gap, params.n - gap)

    curve = hopping_decay_bound(params, np.arange(params.n // 2 + 1))
    if curve is None:
        logging.info("Hopping bound inapplicable: a rate matrix is gapless")
        bound, holds, worst = None, None, float('nan')
    else:
        bound = curve[distance]
        holds = bool(np.all(np.abs(M) <= bound + 1e-12))
        worst = float(np.max(np.abs(M) / bound))
    profile = decay_profile(M, [(i,) for i in range(params.n)], lattice, k=2, fit_max=fit_max,
                            coefficients=np.concatenate([model.gamma_in, model.gamma_out]))
    logging.info(f"Hopping decay on n={params.n}: preferred fit {profile.preferred_fit}")
    return HoppingReport(M, bound, curve is not None, holds, worst, profile)


def hopping_coefficients(H: np.ndarray, n: int) -> np.ndarray:
    """
    Coefficient M_ij of −a_i† ρ a_j in a dense super-Hamiltonian matrix, using
    orthogonality of the a_i† ⊗ a_j^T products to every other quadratic term.
    """
    H = np.asarray(H)
    a = jordan_wigner(n)
    norm = (2.0 ** (n - 1)) ** 2
    M = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            M[i, j] = -np.vdot(np.kron(a[i].conj().T, a[j].T), H) / norm
    return M
