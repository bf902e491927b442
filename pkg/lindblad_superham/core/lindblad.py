"""
Lindbladians in jump form: model description, vectorized assembly, spectra,
steady states and time evolution.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg as la
from scipy import sparse

from lindblad_superham.core.errors import (
    CheckLedger,
    DimensionError,
    SpectrumError,
    SteadyStateError,
)
from lindblad_superham.core.operators import (
    HERMITIAN_TOL,
    LatticeGeometry,
    embed,
    embed_superop,
    general_spectrum,
    hermitian_residual,
    random_hermitian,
    unvec,
    vec,
)

DEFAULT_MAX_SUPEROP_DIM = 16384
ZERO_THRESHOLD_REL = 1e-8
POSITIVE_REAL_TOL = 1e-9
EIG_COND_LIMIT = 1e6


@dataclass(frozen=True)
class JumpTerm:
    """A weighted jump operator c · (L ρ L† − ½{L†L, ρ}) on a set of sites."""
    matrix: np.ndarray = field(repr=False)
    sites: Tuple[int, ...]
    weight: float = 1.0
    partner: Optional[int] = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, 'matrix', np.asarray(self.matrix, dtype=complex))
        object.__setattr__(self, 'sites', tuple(int(s) for s in self.sites))
        object.__setattr__(self, 'weight', float(self.weight))
        if not self.weight > 0:
            raise ValueError(f"Jump weight must be positive, got {self.weight} ({self.label})")
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionError(f"Jump matrix must be square, got {self.matrix.shape}")


@dataclass(frozen=True)
class HamiltonianTerm:
    matrix: np.ndarray = field(repr=False)
    sites: Tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, 'matrix', np.asarray(self.matrix, dtype=complex))
        object.__setattr__(self, 'sites', tuple(int(s) for s in self.sites))


@dataclass(frozen=True)
class LindbladSpec:
    """Lattice plus local jump and Hamiltonian terms; k is the declared locality."""
    lattice: LatticeGeometry
    jumps: Tuple[JumpTerm, ...] = ()
    hamiltonian: Tuple[HamiltonianTerm, ...] = ()
    k: Optional[int] = None
    name: str = "lindbladian"

    def __post_init__(self):
        object.__setattr__(self, 'jumps', tuple(self.jumps))
        object.__setattr__(self, 'hamiltonian', tuple(self.hamiltonian))
        for term in self.jumps + self.hamiltonian:
            for site in term.sites:
                self.lattice.check_site(site)
            expected = self.lattice.d ** len(term.sites)
            if term.matrix.shape[0] != expected:
                raise DimensionError(
                    f"Term '{term.label}' has dim {term.matrix.shape[0]} but support {term.sites} needs {expected}")
        if self.k is None:
            sizes = [len(t.sites) for t in self.jumps + self.hamiltonian]
            object.__setattr__(self, 'k', max(sizes) if sizes else 1)

    def full_jump(self, index: int) -> np.ndarray:
        term = self.jumps[index]
        return embed(term.matrix, term.sites, self.lattice)

    def full_hamiltonian(self) -> np.ndarray:
        H = np.zeros((self.lattice.dim, self.lattice.dim), dtype=complex)
        for term in self.hamiltonian:
            H += embed(term.matrix, term.sites, self.lattice)
        return H

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Apply the Lindbladian term by term, without building the superoperator."""
        rho = np.asarray(rho, dtype=complex)
        H = self.full_hamiltonian()
        out = -1j * (H @ rho - rho @ H)
        for index, term in enumerate(self.jumps):
            L = self.full_jump(index)
            LdL = L.conj().T @ L
            out += term.weight * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
        return out


@dataclass(frozen=True)
class SuperOpMatrix:
    """Matrix of a superoperator on row-major vectorized operators."""
    matrix: np.ndarray = field(repr=False)
    lattice: LatticeGeometry
    provenance: str = ""

    @property
    def dim(self) -> int:
        return self.lattice.dim

    def apply(self, op: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(op), self.dim)

    def adjoint(self) -> "SuperOpMatrix":
        """Hilbert-Schmidt adjoint."""
        return SuperOpMatrix(self.matrix.conj().T, self.lattice, f"{self.provenance}*")


def normalize_jumps(spec: LindbladSpec) -> LindbladSpec:
    """
    Same generator with every jump rescaled to unit Hilbert-Schmidt norm on its
    support, the squared norm moved into the weight.
    """
    jumps = []
    for term in spec.jumps:
        norm2 = float(np.vdot(term.matrix, term.matrix).real)
        if norm2 == 0:
            raise ValueError(f"Jump '{term.label}' is zero")
        jumps.append(replace(term, matrix=term.matrix / np.sqrt(norm2), weight=term.weight * norm2))
    return replace(spec, jumps=tuple(jumps))


SuperOpLike = Union[SuperOpMatrix, LindbladSpec, np.ndarray]


def as_superop(target: SuperOpLike, max_dim: Optional[int] = None) -> SuperOpMatrix:
    """Accept a spec, a SuperOpMatrix or a raw square array."""
    if isinstance(target, SuperOpMatrix):
        return target
    if isinstance(target, LindbladSpec):
        return assemble(target, max_dim=max_dim)
    matrix = np.asarray(target, dtype=complex)
    dim = int(round(np.sqrt(matrix.shape[0])))
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or dim * dim != matrix.shape[0]:
        raise DimensionError(f"Superoperator matrix must be N²×N², got {matrix.shape}")
    return SuperOpMatrix(matrix, LatticeGeometry.for_dim(dim), "array")


def assemble(spec: LindbladSpec, max_dim: Optional[int] = None) -> SuperOpMatrix:
    """
    Vectorized generator
    S = Σ_j c_j (L⊗L̄ − ½ L†L⊗I − ½ I⊗(L†L)^T) − i(H⊗I − I⊗H^T).
    """
    cap = max_dim or DEFAULT_MAX_SUPEROP_DIM
    N = spec.lattice.dim
    if N * N > cap:
        raise DimensionError(f"Superoperator dimension {N * N} exceeds the configured cap {cap}")

    S = np.zeros((N * N, N * N), dtype=complex)
    K = np.zeros((N, N), dtype=complex)
    for index, term in enumerate(spec.jumps):
        L = spec.full_jump(index)
        S += term.weight * np.kron(L, L.conj())
        K += term.weight * (L.conj().T @ L)
    G = -0.5 * K - 1j * spec.full_hamiltonian()
    identity = np.eye(N)
    S += np.kron(G, identity) + np.kron(identity, G.conj())
    logging.info(f"Assembled '{spec.name}': {len(spec.jumps)} jumps, superoperator dim {N * N}")
    return SuperOpMatrix(S, spec.lattice, spec.name)


def dissipator_superop(L: np.ndarray, weight: float = 1.0) -> np.ndarray:
    """c (L⊗L̄ − ½ L†L⊗I − ½ I⊗(L†L)^T) on the operators of L's own support."""
    L = np.asarray(L, dtype=complex)
    LdL = L.conj().T @ L
    identity = np.eye(L.shape[0])
    return weight * (np.kron(L, L.conj()) - 0.5 * (np.kron(LdL, identity) + np.kron(identity, LdL.T)))


def assemble_sparse(spec: LindbladSpec) -> sparse.csr_matrix:
    """
    CSR generator built term by term from local superoperators, for ring-wide
    checks where the dense matrix would be wasteful.
    """
    lattice = spec.lattice
    size = lattice.dim ** 2
    S = sparse.csr_matrix((size, size), dtype=complex)
    for term in spec.jumps:
        S = S + embed_superop(dissipator_superop(term.matrix, term.weight), term.sites, lattice, sparse_output=True)
    for term in spec.hamiltonian:
        identity = np.eye(term.matrix.shape[0])
        local = -1j * (np.kron(term.matrix, identity) - np.kron(identity, term.matrix.T))
        S = S + embed_superop(local, term.sites, lattice, sparse_output=True)
    S.eliminate_zeros()
    logging.debug(f"Sparse generator '{spec.name}': {S.nnz} nonzeros in dim {size}")
    return S.tocsr()


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray = field(repr=False)
    gap: float
    steady_state_count: int
    zero_threshold: float
    has_nonzero: bool
    max_real: float


def spectrum_and_gap(target: SuperOpLike, zero_threshold: Optional[float] = None) -> SpectrumReport:
    """
    Spectrum and Lindbladian gap (smallest |Re λ| among eigenvalues with
    |λ| above the zero threshold, which defaults to 1e-8 times the spectral radius).
    """
    S = as_superop(target)
    eigenvalues = general_spectrum(S.matrix)
    radius = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    threshold = zero_threshold if zero_threshold is not None else ZERO_THRESHOLD_REL * radius
    max_real = float(np.max(eigenvalues.real))
    if max_real > POSITIVE_REAL_TOL * max(1.0, radius):
        raise SpectrumError(f"Eigenvalue with positive real part {max_real:.3e}: not a Lindbladian")

    zero = np.abs(eigenvalues) <= threshold
    nonzero = eigenvalues[~zero]
    gap = float(np.min(np.abs(nonzero.real))) if nonzero.size else 0.0
    if not nonzero.size:
        logging.info("Spectrum has no nonzero eigenvalues; gap reported as 0")
    return SpectrumReport(eigenvalues, gap, int(zero.sum()), float(threshold), bool(nonzero.size), max_real)


@dataclass(frozen=True)
class SteadyStateReport:
    states: Tuple[np.ndarray, ...] = field(repr=False)
    kernel_dim: int
    hermitian_basis: Tuple[np.ndarray, ...] = field(repr=False)

    @property
    def unique(self) -> bool:
        return self.kernel_dim == 1

    @property
    def state(self) -> np.ndarray:
        if not self.states:
            raise SteadyStateError("No physical steady state in the kernel")
        return self.states[0]


def _hermitian_span(kernel: np.ndarray, dim: int) -> Tuple[np.ndarray, ...]:
    """Real-orthonormal Hermitian matrices spanning the same space as the kernel vectors."""
    candidates = []
    for vector in kernel:
        K = unvec(vector, dim)
        candidates.append((K + K.conj().T) / 2)
        candidates.append((K - K.conj().T) / 2j)
    real_rows = np.array([np.concatenate([c.real.ravel(), c.imag.ravel()]) for c in candidates])
    _, _, Wt = la.svd(real_rows, full_matrices=False)
    basis = []
    for row in Wt[:len(kernel)]:
        H = (row[:dim * dim] + 1j * row[dim * dim:]).reshape(dim, dim)
        basis.append((H + H.conj().T) / 2)
    return tuple(basis)


def steady_states(target: SuperOpLike, threshold: Optional[float] = None,
                  psd_tol: float = 1e-8) -> SteadyStateReport:
    """
    Kernel of S via SVD, turned into trace-one positive states where possible.
    """
    S = as_superop(target)
    _, singular_values, Vh = la.svd(S.matrix)
    top = singular_values[0] if singular_values.size else 0.0
    cutoff = threshold if threshold is not None else ZERO_THRESHOLD_REL * max(top, np.finfo(float).tiny)
    kernel = Vh[singular_values <= cutoff].conj()
    if len(kernel) == 0:
        raise SteadyStateError(
            f"Numerical kernel is empty (smallest singular value {singular_values[-1]:.3e}, cutoff {cutoff:.3e})")

    basis = _hermitian_span(kernel, S.dim)
    states = []
    for H in basis:
        trace = np.trace(H).real
        if abs(trace) <= 1e-10:
            continue
        rho = H / trace
        if la.eigvalsh(rho).min() >= -psd_tol:
            states.append(rho)
    if len(kernel) > 1:
        logging.info(f"Kernel dimension {len(kernel)}: steady state is not unique")
    return SteadyStateReport(tuple(states), len(kernel), basis)


def propagator(target: SuperOpLike, t: float) -> np.ndarray:
    """Matrix of e^{S t}; eigendecomposition when well conditioned, expm otherwise."""
    if t < 0:
        raise ValueError(f"Evolution time must be non-negative, got {t}")
    S = as_superop(target)
    size = S.matrix.shape[0]
    if t == 0:
        return np.eye(size, dtype=complex)
    w, V = la.eig(S.matrix)
    condition = np.linalg.cond(V)
    if np.isfinite(condition) and condition < EIG_COND_LIMIT:
        return la.solve(V.T, (V * np.exp(w * t)).T).T
    logging.debug(f"Eigenvector condition {condition:.2e}; using scaling-and-squaring")
    return la.expm(S.matrix * t)


def evolve(target: SuperOpLike, rho0: np.ndarray, t: float) -> np.ndarray:
    S = as_superop(target)
    rho = unvec(propagator(S, t) @ vec(rho0), S.dim)
    return (rho + rho.conj().T) / 2 if hermitian_residual(rho) < 1e-9 else rho


def choi_matrix(channel: np.ndarray) -> np.ndarray:
    """Choi matrix Σ |i⟩⟨j| ⊗ E(|i⟩⟨j|) of a channel given as a superoperator matrix."""
    channel = np.asarray(channel)
    N = int(round(np.sqrt(channel.shape[0])))
    return channel.reshape(N, N, N, N).transpose(2, 0, 3, 1).reshape(N * N, N * N)


def validate(spec: LindbladSpec, samples: int = 20, seed: int = 0, tol: float = HERMITIAN_TOL) -> CheckLedger:
    """
    Report-only structural checks: traceless terms, Hermitian Hamiltonian,
    contiguous supports within k sites, adjoint pairing, and trace and
    hermiticity preservation on random states.
    """
    ledger = CheckLedger(f"validate {spec.name}")
    lattice = spec.lattice

    for index, term in enumerate(spec.jumps):
        subject = term.label or f"jump[{index}]"
        scale = max(1.0, float(np.max(np.abs(term.matrix))))
        ledger.record("traceless", abs(np.trace(term.matrix)) / scale, tol, subject)
        ledger.record_flag("support", lattice.is_contiguous(term.sites) and len(term.sites) <= spec.k, subject,
                           detail=f"sites={term.sites}")
        if term.partner is not None:
            if not 0 <= term.partner < len(spec.jumps):
                ledger.record_flag("pairing", False, subject, detail=f"partner index {term.partner} out of range")
                continue
            gap = np.max(np.abs(spec.full_jump(term.partner) - spec.full_jump(index).conj().T))
            ledger.record("pairing", gap, tol, subject)

    for index, term in enumerate(spec.hamiltonian):
        subject = term.label or f"h[{index}]"
        ledger.record("hermitian", hermitian_residual(term.matrix), tol, subject)
        ledger.record("traceless", abs(np.trace(term.matrix)), tol, subject)
        ledger.record_flag("support", lattice.is_contiguous(term.sites) and len(term.sites) <= spec.k, subject,
                           detail=f"sites={term.sites}")

    rng = np.random.default_rng(seed)
    worst_trace, worst_herm = 0.0, 0.0
    for _ in range(samples):
        A = rng.normal(size=(lattice.dim,) * 2) + 1j * rng.normal(size=(lattice.dim,) * 2)
        image = spec.apply(A)
        worst_trace = max(worst_trace, abs(np.trace(image)) / max(1.0, np.abs(image).max()))
        worst_herm = max(worst_herm, np.max(np.abs(spec.apply(A.conj().T) - image.conj().T)))
    ledger.record("trace_preservation", worst_trace, tol, spec.name)
    ledger.record("hermiticity_preservation", worst_herm, tol, spec.name)

    H = random_hermitian(lattice.dim, rng)
    ledger.record("hermitian_image", hermitian_residual(spec.apply(H)), tol, spec.name)
    return ledger
