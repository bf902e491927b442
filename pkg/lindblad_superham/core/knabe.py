"""
Finite-size gap certificates for frustration-free super-Hamiltonians on a ring,
and the local-gap table of the classical-like model.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from tqdm import tqdm

from lindblad_superham.core.errors import CheckLedger, SpectrumError
from lindblad_superham.core.models import ClassicalModelParams, classical_gibbs, classical_jump
from lindblad_superham.core.operators import LatticeGeometry, embed_superop, hermitian_power, vec
from lindblad_superham.core.super_hamiltonian import SuperTerm, jump_term_superop

POSITIVE_REL = 1e-9
PRUNE_REL = 1e-13
MAX_RING_SITES = 6
DEFAULT_U_VALUES = (-1.0, 0.5, 2.0)


@dataclass(frozen=True)
class LocalTermSet:
    """Local PSD terms in ring order, term k adjacent to term k+1."""
    lattice: LatticeGeometry
    terms: Tuple[SuperTerm, ...] = field(repr=False)
    kernel: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.terms)

    def pairs(self) -> List[Tuple[int, int]]:
        m = len(self.terms)
        if m < 2:
            raise ValueError(f"Need at least two local terms, got {m}")
        if m == 2:
            return [(0, 1)]
        return [(k, (k + 1) % m) for k in range(m)]


def classical_local_terms(params: ClassicalModelParams) -> LocalTermSet:
    """𝓗_k = Σ_b γ_{k,b} 𝓗_{k,b} on sites (k−1, k, k+1), with vec(√σ) as shared kernel."""
    terms = []
    for k in range(params.n):
        local = np.zeros((64, 64), dtype=complex)
        for b in range(3):
            gamma = params.gamma[k, b]
            if gamma == 0:
                continue
            L = classical_jump(b)
            w = params.beta * params.omega(k, b)
            out, back = gamma * np.exp(-w / 2), gamma * np.exp(w / 2)
            local += jump_term_superop(L, out, back) + jump_term_superop(L.conj().T, back, out)
        terms.append(SuperTerm(params.support(k), local, f"H[{k}]"))
    kernel = vec(hermitian_power(classical_gibbs(params), 0.5)) if params.n <= MAX_RING_SITES else None
    return LocalTermSet(params.lattice, tuple(terms), kernel)


def frustration_free_residuals(terms: LocalTermSet, tol: float = 1e-8) -> CheckLedger:
    """Each term PSD and annihilating the shared kernel vector."""
    ledger = CheckLedger("frustration freeness")
    for term in terms.terms:
        scale = max(1.0, float(np.max(np.abs(term.matrix))))
        smallest = float(la.eigvalsh((term.matrix + term.matrix.conj().T) / 2).min())
        ledger.record("local_psd", max(0.0, -smallest) / scale, 1e-9, term.label)
        if terms.kernel is not None:
            image = term.full(terms.lattice, sparse_output=True) @ terms.kernel
            ledger.record("kills_kernel", float(np.linalg.norm(image)), tol, term.label)
    return ledger


def positive_projector(H: np.ndarray, rel: float = POSITIVE_REL) -> Tuple[np.ndarray, float]:
    """Projector onto the eigenvalues above rel·‖H‖, and the smallest of them."""
    H = np.asarray(H)
    w, V = la.eigh((H + H.conj().T) / 2)
    norm = float(np.max(np.abs(w))) if w.size else 0.0
    positive = w > rel * norm
    if norm == 0 or not positive.any():
        raise SpectrumError("Local term has no positive spectrum")
    kept = V[:, positive]
    return kept @ kept.conj().T, float(w[positive].min())


def _window(terms: LocalTermSet, indices: Sequence[int]) -> Tuple[LatticeGeometry, Dict[int, int]]:
    union = set()
    for index in indices:
        union |= set(terms.terms[index].sites)
    arc = terms.lattice.arc(union)
    return LatticeGeometry(len(arc), terms.lattice.d), {site: pos for pos, site in enumerate(arc)}


def _local_sum(terms: LocalTermSet, matrices: Dict[int, np.ndarray], indices: Sequence[int]):
    window, position = _window(terms, indices)
    total = 0
    for index in indices:
        sites = [position[s] for s in terms.terms[index].sites]
        total = total + embed_superop(matrices[index], sites, window)
    return total


def _smallest_positive(values: np.ndarray, rel: float = POSITIVE_REL) -> float:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    positive = values[values > rel * max(scale, 1.0)]
    if not positive.size:
        raise SpectrumError("Operator has no positive spectrum")
    return float(positive.min())


@dataclass(frozen=True)
class LocalGap:
    value: float
    pair_gaps: Tuple[float, ...]
    pairs: Tuple[Tuple[int, int], ...]


def local_gap(terms: LocalTermSet, projectors: Optional[Dict[int, np.ndarray]] = None) -> LocalGap:
    """Minimum over ring-adjacent pairs of the smallest nonzero eigenvalue of P_k + P_{k+1}."""
    if projectors is None:
        projectors = {k: positive_projector(t.matrix)[0] for k, t in enumerate(terms.terms)}
    pairs = terms.pairs()
    gaps = []
    for a, b in pairs:
        pair_sum = _local_sum(terms, projectors, (a, b))
        try:
            gaps.append(_smallest_positive(la.eigvalsh(pair_sum)))
        except SpectrumError as e:
            raise SpectrumError(f"Pair ({a}, {b}) sums to the zero operator") from e
    return LocalGap(float(min(gaps)), tuple(gaps), tuple(pairs))


def knabe_bound(gamma_loc: float, degree: int = 2) -> float:
    """2(δ−1)(γ_loc − (1 − 1/(2(δ−1))))."""
    if degree < 2:
        raise ValueError(f"Graph degree must be at least 2, got {degree}")
    if not -1e-12 <= gamma_loc <= 2 + 1e-12:
        raise ValueError(f"Local gap {gamma_loc} outside [0, 2]")
    return 2 * (degree - 1) * (gamma_loc - (1 - 1 / (2 * (degree - 1))))


def distant_commutators(terms: LocalTermSet) -> float:
    """Largest ‖[𝓗_k, 𝓗_{k+2}]‖ over the ring; terms sharing only boundary sites commute."""
    m = len(terms)
    worst = 0.0
    for k in range(m):
        j = (k + 2) % m
        if j == k or (k + 1) % m == j or (j + 1) % m == k:
            continue
        matrices = {k: terms.terms[k].matrix, j: terms.terms[j].matrix}
        window, position = _window(terms, (k, j))
        A = embed_superop(matrices[k], [position[s] for s in terms.terms[k].sites], window)
        B = embed_superop(matrices[j], [position[s] for s in terms.terms[j].sites], window)
        worst = max(worst, float(np.max(np.abs(A @ B - B @ A))))
    return worst


def sparse_gap(M: sparse.spmatrix, rel: float = POSITIVE_REL) -> Tuple[float, int]:
    """
    Smallest nonzero eigenvalue and kernel dimension of a sparse Hermitian PSD
    matrix, solved block by block over its connected components.
    """
    M = sparse.csr_matrix(M)
    magnitude = abs(M)
    if magnitude.nnz:
        M = M.multiply(magnitude >= PRUNE_REL * magnitude.max()).tocsr()
    count, labels = connected_components(abs(M) + abs(M).T, directed=False)
    values = []
    for component in range(count):
        members = np.flatnonzero(labels == component)
        block = M[members][:, members].toarray()
        values.append(la.eigvalsh((block + block.conj().T) / 2))
    values = np.concatenate(values)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    kernel = int(np.sum(values <= rel * max(scale, 1.0)))
    logging.debug(f"Sparse spectrum over {count} blocks: kernel dimension {kernel}")
    return _smallest_positive(values, rel), kernel


def _ring_sum(terms: LocalTermSet, matrices: Dict[int, np.ndarray]) -> sparse.csr_matrix:
    total = None
    for index, term in enumerate(terms.terms):
        local = np.where(np.abs(matrices[index]) >= PRUNE_REL * np.max(np.abs(matrices[index])), matrices[index], 0)
        piece = embed_superop(local, term.sites, terms.lattice, sparse_output=True)
        total = piece if total is None else total + piece
    return total.tocsr()


@dataclass(frozen=True)
class GapCertificate:
    gamma_loc: float
    degree: int
    bound: float
    g_min: float
    g_values: Tuple[float, ...]
    pair_gaps: Tuple[float, ...]
    projector_gap: Optional[float] = None
    hamiltonian_gap: Optional[float] = None
    alpha: float = 1.0
    ledger: CheckLedger = field(default_factory=lambda: CheckLedger("certificate"), repr=False)

    @property
    def valid(self) -> bool:
        return self.bound > 0

    @property
    def hamiltonian_bound(self) -> float:
        """α·g_min·bound, the certified lower bound on gap(Σ 𝓗_k)."""
        return self.alpha * self.g_min * self.bound


def certify_classical(params: ClassicalModelParams, measure: bool = True,
                      max_sites: int = MAX_RING_SITES, tol: float = 1e-8) -> GapCertificate:
    """
    Local projectors, local gap and the ring certificate for the classical model;
    on small rings also the measured gaps of Σ P_k and Σ 𝓗_k. The weights stay
    inside the local terms, so α = 1.
    """
    terms = classical_local_terms(params)
    projectors, g_values = {}, []
    for k, term in enumerate(terms.terms):
        P, g = positive_projector(term.matrix)
        projectors[k] = P
        g_values.append(g)
    gap = local_gap(terms, projectors)
    bound = knabe_bound(min(gap.value, 2.0), 2)
    g_min = float(min(g_values))
    ledger = CheckLedger(f"knabe n={params.n}")

    projector_gap = hamiltonian_gap = None
    if measure and params.n <= max_sites:
        ledger.merge(frustration_free_residuals(terms))
        projector_gap, _ = sparse_gap(_ring_sum(terms, projectors))
        hamiltonian_gap, kernel = sparse_gap(_ring_sum(terms, {k: t.matrix for k, t in enumerate(terms.terms)}))
        ledger.record_flag("unique_ground_state", kernel == 1, "Σ H_k", value=kernel)
        if bound > 0:
            ledger.record("projector_gap_certified", max(0.0, bound - projector_gap), tol, "Σ P_k")
            ledger.record("hamiltonian_gap_certified", max(0.0, g_min * bound - hamiltonian_gap), tol, "Σ H_k")
    logging.info(f"🔍 n={params.n}: γ_loc={gap.value:.4f}, bound={bound:.4f}, g_min={g_min:.4f}")
    return GapCertificate(gap.value, 2, bound, g_min, tuple(g_values), gap.pair_gaps,
                          projector_gap, hamiltonian_gap, 1.0, ledger)


def classical_projector_gap(params: ClassicalModelParams, k: int) -> float:
    """
    Smallest positive eigenvalue of 𝓗_k in closed form:
    min(min_{b≠b'} (m_b + m_{b'})/2, min_b γ_b cosh(βω_b/2)), m_b = γ_b e^{−β|ω_b|/2}.
    """
    gamma = params.gamma[k]
    w = np.array([params.beta * params.omega(k, b) for b in range(3)])
    m = gamma * np.exp(-np.abs(w) / 2)
    candidates = [(m[b] + m[c]) / 2 for b in range(3) for c in range(b + 1, 3) if m[b] + m[c] > 0]
    candidates += [gamma[b] * np.cosh(w[b] / 2) for b in range(3) if gamma[b] > 0]
    return float(min(candidates))


def classical_pair_gap(params: ClassicalModelParams, k: int) -> float:
    """
    Gap of P_k + P_{k+1} on rings of at least four sites:
    min(1, 1 − |1 − q²|·max_l g(A_l)·max_r g(B_r)) with q = e^{βu/2},
    A_l = e^{β(ε_k − μ + u l)/2}, B_r = e^{β(ε_{k+1} − μ + u r)/2},
    g(A) = A/√((1 + A²)(1 + q²A²)). Requires all weights positive.
    """
    if params.n < 4:
        raise ValueError("Closed-form pair gap needs n ≥ 4")
    if np.any(params.gamma == 0):
        raise ValueError("Closed-form pair gap assumes positive weights")
    q2 = np.exp(params.beta * params.u)

    def g(A):
        return A / np.sqrt((1 + A ** 2) * (1 + q2 * A ** 2))

    nxt = (k + 1) % params.n
    A = np.exp(params.beta * (params.eps[k] - params.mu + params.u * np.array([0, 1])) / 2)
    B = np.exp(params.beta * (params.eps[nxt] - params.mu + params.u * np.array([0, 1])) / 2)
    return float(min(1.0, 1 - abs(1 - q2) * g(A).max() * g(B).max()))


@dataclass(frozen=True)
class KnabeRow:
    label: str
    u_values: Tuple[float, ...]
    gamma_loc: Tuple[float, ...]
    spread: Tuple[float, ...] = ()

    def as_row(self) -> dict:
        row = {"model": self.label}
        for index, (u, value) in enumerate(zip(self.u_values, self.gamma_loc)):
            row[f"u={u:g}"] = value
            if self.spread:
                row[f"u={u:g} std"] = self.spread[index]
        return row


@dataclass(frozen=True)
class KnabeTable:
    beta: float
    n: int
    instances: int
    rows: Tuple[KnabeRow, ...]

    def row(self, label: str) -> KnabeRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)


def _gamma_loc(params: ClassicalModelParams) -> float:
    terms = classical_local_terms(params)
    return local_gap(terms).value


def knabe_table(beta: float = 1.0, u_values: Sequence[float] = DEFAULT_U_VALUES, n: int = 4,
                instances: int = 100, seed: int = 0, mu: float = 0.0, progress: bool = True) -> KnabeTable:
    """
    Local gap γ_loc of the classical model for random ε ∈ [0, 1] (mean over
    seeded instances), constant ε = 1 and 0.5, and alternating ε = 1, 10.
    Instance i of the random row uses default_rng([seed, i]).
    """
    if n < 4 or (n % 2):
        raise ValueError(f"Table ring must have an even number of sites ≥ 4, got {n}")
    u_values = tuple(float(u) for u in u_values)
    rows = []

    randoms, spreads = [], []
    for u in u_values:
        samples = []
        for i in tqdm(range(instances), desc=f"random ε, u={u:g}", disable=not progress):
            rng = np.random.default_rng([seed, i])
            samples.append(_gamma_loc(ClassicalModelParams.random(n, rng, mu=mu, u=u, beta=beta)))
        randoms.append(float(np.mean(samples)))
        spreads.append(float(np.std(samples)))
    rows.append(KnabeRow("random", u_values, tuple(randoms), tuple(spreads)))

    deterministic = [
        ("const eps=1", lambda u: ClassicalModelParams.uniform(n, 1.0, mu, u, beta)),
        ("const eps=0.5", lambda u: ClassicalModelParams.uniform(n, 0.5, mu, u, beta)),
        ("alternating eps=1,10", lambda u: ClassicalModelParams.alternating(n, (1.0, 10.0), mu, u, beta)),
    ]
    for label, factory in deterministic:
        values = tuple(_gamma_loc(factory(u)) for u in u_values)
        rows.append(KnabeRow(label, u_values, values))
        logging.info(f"📊 {label}: " + ", ".join(f"{v:.3f}" for v in values))
    return KnabeTable(beta, n, instances, tuple(rows))
