"""
Quantum detailed balance: the Γ_s superoperators, QDB residuals, the
modular basis of a reference state, GKS coefficient matrices, canonical
forms and the deformed family Γ^{-x} ∘ 𝓛 ∘ Γ^x.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la

from lindblad_superham.core.errors import NotQDBError, ReconstructionError, SingularStateError
from lindblad_superham.core.lindblad import (
    JumpTerm,
    LindbladSpec,
    SuperOpLike,
    SuperOpMatrix,
    as_superop,
    assemble,
)
from lindblad_superham.core.operators import (
    HermitianOperatorBasis,
    LatticeGeometry,
    _hermitian_eigh,
    operator_norm,
)

SINGULAR_TOL = 1e-14
GROUP_TOL = 1e-9
DROP_REL = 1e-10


class StatePowers:
    """Eigendecomposition of a positive definite state, reused for all its powers."""

    def __init__(self, sigma: np.ndarray):
        w, V = _hermitian_eigh(np.asarray(sigma, dtype=complex))
        if w.min() <= SINGULAR_TOL * max(w.max(), 1.0):
            raise SingularStateError(f"Reference state is singular (smallest eigenvalue {w.min():.3e})")
        trace = w.sum()
        if abs(trace - 1.0) > 1e-8:
            logging.warning(f"Reference state has trace {trace:.6f}, expected 1")
        self.eigenvalues = w
        self.eigenvectors = V

    def power(self, x: float) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues ** x) @ V.conj().T


def _check_s(s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    return float(s)


def gamma_apply(sigma: np.ndarray, s: float, x: float, A: np.ndarray) -> np.ndarray:
    """Γ_s^x(A) = σ^{x(1−s)} A σ^{xs}."""
    s = _check_s(s)
    powers = StatePowers(sigma)
    return powers.power(x * (1 - s)) @ np.asarray(A) @ powers.power(x * s)


def gamma_superop(sigma: Union[np.ndarray, StatePowers], s: float, x: float = 1.0) -> np.ndarray:
    """Matrix of Γ_s^x on vectorized operators."""
    s = _check_s(s)
    powers = sigma if isinstance(sigma, StatePowers) else StatePowers(sigma)
    return np.kron(powers.power(x * (1 - s)), powers.power(x * s).T)


@dataclass(frozen=True)
class QDBResidual:
    s: float
    qdb1: float
    qdb2: float

    def holds(self, tol: float) -> bool:
        return max(self.qdb1, self.qdb2) <= tol


def qdb_residual(target: SuperOpLike, sigma: np.ndarray, s: float) -> QDBResidual:
    """
    Scale-free residuals of 𝓛∘Γ_s = Γ_s∘𝓛* (normalized by ‖𝓛‖‖Γ_s‖) and of the
    self-adjointness of Γ_s^{-1/2}∘𝓛∘Γ_s^{1/2} (normalized by its norm).
    """
    S = as_superop(target).matrix
    powers = StatePowers(sigma)
    G = gamma_superop(powers, s, 1.0)
    conjugated = gamma_superop(powers, s, -0.5) @ S @ gamma_superop(powers, s, 0.5)

    scale = operator_norm(S) or 1.0
    qdb1 = operator_norm(S @ G - G @ S.conj().T) / (scale * operator_norm(G))
    qdb2 = operator_norm(conjugated - conjugated.conj().T) / (operator_norm(conjugated) or 1.0)
    return QDBResidual(float(s), float(qdb1), float(qdb2))


def adjoint_superop(target: SuperOpLike) -> SuperOpMatrix:
    return as_superop(target).adjoint()


@dataclass(frozen=True)
class ModularBasis:
    """
    Eigenbasis of Δ_σ(A) = σAσ^{-1}: orthonormal operators S_α with
    Δ_σ(S_α) = e^{-ω_α} S_α, S_0 = I/√N and S_α† = S_{partner[α]}.
    """
    sigma: np.ndarray = field(repr=False)
    operators: np.ndarray = field(repr=False)
    frequencies: np.ndarray
    partner: np.ndarray
    groups: Tuple[np.ndarray, ...] = field(repr=False)
    energies: np.ndarray = field(repr=False)
    labels: Tuple[str, ...] = field(repr=False)

    identity_index = 0

    def __len__(self) -> int:
        return len(self.operators)

    def stacked(self) -> np.ndarray:
        return self.operators

    @property
    def supports(self):
        return None

    def group_of(self, index: int) -> int:
        for g, members in enumerate(self.groups):
            if index in members:
                return g
        raise IndexError(index)


def _frequency_groups(frequencies: np.ndarray, group_tol: float) -> Tuple[np.ndarray, ...]:
    tol = group_tol * float(np.max(np.abs(frequencies)))
    order = np.argsort(frequencies, kind='stable')
    groups: List[List[int]] = [[int(order[0])]]
    for previous, current in zip(order[:-1], order[1:]):
        if frequencies[current] - frequencies[previous] > tol:
            groups.append([])
        groups[-1].append(int(current))
    return tuple(np.array(sorted(g)) for g in groups)


def modular_basis(sigma: np.ndarray, group_tol: float = GROUP_TOL) -> ModularBasis:
    powers = StatePowers(sigma)
    p, U = powers.eigenvalues, powers.eigenvectors
    N = len(p)
    E = -np.log(p)

    # Diagonal sector: orthonormal real vectors, the first proportional to ones.
    seed = np.column_stack([np.ones(N), np.eye(N)[:, :N - 1]])
    Q, _ = np.linalg.qr(seed)
    Q[:, 0] *= np.sign(Q[0, 0])

    operators, frequencies, labels = [], [], []
    for m in range(N):
        operators.append((U * Q[:, m]) @ U.conj().T)
        frequencies.append(0.0)
        labels.append("I" if m == 0 else f"D{m}")

    offdiagonal = [(i, j) for i in range(N) for j in range(N) if i != j]
    position = {}
    for i, j in offdiagonal:
        position[(i, j)] = len(operators)
        operators.append(np.outer(U[:, i], U[:, j].conj()))
        frequencies.append(E[i] - E[j])
        labels.append(f"O{i},{j}")

    partner = np.arange(len(operators))
    for (i, j), index in position.items():
        partner[index] = position[(j, i)]

    frequencies = np.array(frequencies)
    return ModularBasis(
        sigma=np.asarray(sigma),
        operators=np.array(operators),
        frequencies=frequencies,
        partner=partner,
        groups=_frequency_groups(frequencies, group_tol),
        energies=E,
        labels=tuple(labels),
    )


OperatorFrame = Union[HermitianOperatorBasis, ModularBasis]


def frame_superop(coefficients: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Σ_ab K_ab F_a ⊗ conj(F_b), the matrix of ρ ↦ Σ K_ab F_a ρ F_b†."""
    count, N, _ = elements.shape
    flat = elements.reshape(count, N * N)
    grouped = flat.T @ coefficients @ flat.conj()
    return grouped.reshape(N, N, N, N).transpose(0, 2, 1, 3).reshape(N * N, N * N)


@dataclass(frozen=True)
class CoefficientMatrix:
    """
    GKS data of a superoperator over an orthonormal frame:
    𝓛(ρ) = Σ K_ab F_a ρ F_b† + {G, ρ} − i[H, ρ], indices over traceless elements.
    """
    matrix: np.ndarray
    hamiltonian: np.ndarray = field(repr=False)
    shift: np.ndarray = field(repr=False)
    basis: OperatorFrame = field(repr=False)
    indices: np.ndarray
    reconstruction_residual: float
    trace_residual: float

    @property
    def supports(self) -> Optional[Tuple[Tuple[int, ...], ...]]:
        supports = getattr(self.basis, 'supports', None)
        if supports is None:
            return None
        return tuple(supports[i] for i in self.indices)

    def elements(self) -> np.ndarray:
        return self.basis.stacked()[self.indices]

    def min_eigenvalue(self) -> float:
        return float(la.eigvalsh((self.matrix + self.matrix.conj().T) / 2).min())

    def is_psd(self, tol: float = 1e-9) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        return self.min_eigenvalue() >= -tol * scale

    def hamiltonian_norm(self) -> float:
        return operator_norm(self.hamiltonian)

    def offdiagonal_mass(self) -> float:
        total = np.linalg.norm(self.matrix)
        if total == 0:
            return 0.0
        return float(np.linalg.norm(self.matrix - np.diag(np.diag(self.matrix))) / total)

    def locality_violation(self, k: int) -> float:
        """Largest |K_ab| whose joint support is not one window of at most k sites."""
        supports = self.supports
        if supports is None:
            raise ValueError("Frame carries no support metadata")
        lattice = self.basis.lattice
        worst = 0.0
        for a, sa in enumerate(supports):
            for b, sb in enumerate(supports):
                union = set(sa) | set(sb)
                if lattice.is_contiguous(union) and len(union) <= k:
                    continue
                worst = max(worst, abs(self.matrix[a, b]))
        return float(worst)


def gks_matrix(target: SuperOpLike, basis: OperatorFrame, tol: float = 1e-9) -> CoefficientMatrix:
    """
    Project the superoperator onto the orthonormal family {F_a ⊗ F̄_b}; the
    projection is the exact least-squares solution, and identity terms give
    the Hamiltonian and shift parts.
    """
    S = as_superop(target)
    M = S.matrix
    N = S.dim
    elements = basis.stacked()
    count = len(elements)
    if elements.shape[1:] != (N, N):
        raise ValueError(f"Frame elements have shape {elements.shape[1:]}, superoperator acts on dim {N}")
    origin = basis.identity_index
    if origin is None or np.max(np.abs(elements[origin] - np.eye(N) / np.sqrt(N))) > 1e-10:
        raise ValueError("Frame must contain I/√N")

    flat = elements.reshape(count, N * N)
    grouped = M.reshape(N, N, N, N).transpose(0, 2, 1, 3).reshape(N * N, N * N)
    chi = flat.conj() @ grouped @ flat.T

    rest = np.array([a for a in range(count) if a != origin])
    K = chi[np.ix_(rest, rest)]
    F = (np.tensordot(chi[rest, origin], elements[rest], axes=1) / np.sqrt(N)
         + chi[origin, origin] * np.eye(N) / (2 * N))
    shift = (F + F.conj().T) / 2
    hamiltonian = 1j * (F - F.conj().T) / 2

    rebuilt = (frame_superop(K, elements[rest]) + np.kron(F, np.eye(N)) + np.kron(np.eye(N), F.conj()))
    residual = float(np.linalg.norm(rebuilt - M) / max(np.linalg.norm(M), np.finfo(float).tiny))
    if residual > tol:
        raise ReconstructionError(f"Frame does not span the generator (residual {residual:.3e} > {tol:.1e})")

    weighted = np.tensordot(K.T, elements[rest], axes=1)
    dissipator_norm = np.einsum('bki,bkj->ij', elements[rest].conj(), weighted)
    trace_residual = float(np.linalg.norm(shift + 0.5 * dissipator_norm))
    return CoefficientMatrix(K, hamiltonian, shift, basis, rest, residual, trace_residual)


@dataclass(frozen=True)
class CanonicalForm:
    """Diagonal QDB representation Σ γ_α e^{-ω_α/2} 𝒟[S_α] over rotated modular operators."""
    frequencies: np.ndarray
    weights: np.ndarray
    operators: np.ndarray = field(repr=False)
    partner: np.ndarray
    basis: ModularBasis = field(repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    def rebuild(self) -> SuperOpMatrix:
        N = self.operators.shape[1]
        lattice = LatticeGeometry.for_dim(N)
        jumps = [JumpTerm(L, tuple(range(lattice.n)), w * np.exp(-omega / 2), partner=int(p))
                 for L, w, omega, p in zip(self.operators, self.weights, self.frequencies, self.partner)]
        return assemble(LindbladSpec(lattice, tuple(jumps), name="canonical"))


def _zero_group_rotation(members: np.ndarray, partner: np.ndarray) -> np.ndarray:
    """Unitary turning the group's elements into Hermitian combinations."""
    size = len(members)
    local = {int(m): i for i, m in enumerate(members)}
    W = np.zeros((size, size), dtype=complex)
    column = 0
    for i, m in enumerate(members):
        p = int(partner[m])
        if p == m:
            W[i, column] = 1.0
            column += 1
        elif m < p:
            j = local[p]
            W[i, column], W[j, column] = 1 / np.sqrt(2), 1 / np.sqrt(2)
            W[i, column + 1], W[j, column + 1] = 1j / np.sqrt(2), -1j / np.sqrt(2)
            column += 2
    return W


def canonical_form(target: SuperOpLike, sigma: np.ndarray, s: float = 1.0, tol: float = 1e-8,
                   drop: float = DROP_REL) -> CanonicalForm:
    """
    Recover (ω_α, γ_α) by diagonalizing the GKS matrix within each Bohr-frequency
    group of the modular basis; γ_α = K_αα e^{ω_α/2}.
    """
    residual = qdb_residual(target, sigma, s)
    if residual.qdb1 > tol:
        raise NotQDBError(f"QDB residual {residual.qdb1:.3e} exceeds {tol:.1e} at s={s}")

    mb = modular_basis(sigma)
    coefficients = gks_matrix(target, mb)
    K = coefficients.matrix
    scale = max(float(np.max(np.abs(K))), np.finfo(float).tiny)
    if coefficients.hamiltonian_norm() > tol * max(1.0, scale):
        raise NotQDBError(f"Coherent part of norm {coefficients.hamiltonian_norm():.3e} survives")

    # position of every basis index inside K
    where = {int(a): i for i, a in enumerate(coefficients.indices)}
    groups = [np.array([where[int(a)] for a in g if int(a) in where]) for g in mb.groups]
    groups = [g for g in groups if g.size]
    mask = np.zeros(K.shape, dtype=bool)
    for g in groups:
        mask[np.ix_(g, g)] = True
    cross = np.linalg.norm(np.where(mask, 0, K)) / max(np.linalg.norm(K), np.finfo(float).tiny)
    if cross > tol:
        raise NotQDBError(f"GKS matrix couples different Bohr frequencies (relative mass {cross:.3e})")

    elements = mb.operators[coefficients.indices]
    freq = mb.frequencies[coefficients.indices]
    partner_pos = np.array([where[int(mb.partner[a])] for a in coefficients.indices])
    omega_tol = GROUP_TOL * max(float(np.max(np.abs(mb.frequencies))), 1.0)

    frequencies, values, operators, partner = [], [], [], []
    for g in groups:
        omega = float(np.mean(freq[g]))
        block = K[np.ix_(g, g)]
        if omega < -omega_tol:
            continue
        if omega > omega_tol:
            vals, vecs = la.eigh((block + block.conj().T) / 2)
            mirror = partner_pos[g]
            mirror_block = K[np.ix_(mirror, mirror)]
            for value, v in zip(vals, vecs.T):
                u = v.conj()
                mirrored = float(np.real(u.conj() @ mirror_block @ u))
                base = len(frequencies)
                frequencies += [omega, -omega]
                values += [float(value), mirrored]
                operators += [np.tensordot(v, elements[g], axes=1), np.tensordot(u, elements[mirror], axes=1)]
                partner += [base + 1, base]
        else:
            W = _zero_group_rotation(g, partner_pos)
            rotated = W.conj().T @ block @ W
            if np.max(np.abs(rotated.imag)) > tol * max(1.0, scale):
                raise NotQDBError("Zero-frequency block is not real in the Hermitian frame")
            vals, vecs = la.eigh((rotated.real + rotated.real.T) / 2)
            for value, r in zip(vals, vecs.T):
                frequencies.append(0.0)
                values.append(float(value))
                operators.append(np.tensordot(W @ r, elements[g], axes=1))
                partner.append(len(partner))

    frequencies = np.array(frequencies)
    values = np.array(values)
    if values.size and values.min() < -tol * scale:
        raise NotQDBError(f"Negative GKS eigenvalue {values.min():.3e}")
    weights = values * np.exp(frequencies / 2)

    keep = weights > drop * max(float(weights.max(initial=0.0)), np.finfo(float).tiny)
    new_index = -np.ones(len(keep), dtype=int)
    new_index[keep] = np.arange(int(keep.sum()))
    partner = np.array(partner)
    if np.any(keep & ~keep[partner]):
        raise NotQDBError("Kept index set is not closed under the adjoint pairing")
    mismatch = np.abs(weights[keep] - weights[partner[keep]]) / max(float(weights.max(initial=0.0)), 1e-300)
    if mismatch.size and mismatch.max() > tol:
        raise NotQDBError(f"Paired weights differ (relative gap {mismatch.max():.3e})")

    logging.info(f"Canonical form: {int(keep.sum())} weighted modular operators")
    return CanonicalForm(
        frequencies=frequencies[keep],
        weights=weights[keep],
        operators=np.array(operators)[keep] if keep.any() else np.zeros((0,) + mb.operators.shape[1:]),
        partner=new_index[partner[keep]],
        basis=mb,
    )


def deformed_family(target: SuperOpLike, sigma: np.ndarray, s: float, x: float) -> SuperOpMatrix:
    """Γ_s^{-x} ∘ 𝓛 ∘ Γ_s^{x}."""
    S = as_superop(target)
    powers = StatePowers(sigma)
    matrix = gamma_superop(powers, s, -x) @ S.matrix @ gamma_superop(powers, s, x)
    return SuperOpMatrix(matrix, S.lattice, f"{S.provenance} deformed(s={s}, x={x})")


def commutator_check(C: Union[CoefficientMatrix, np.ndarray]) -> float:
    """‖C C̄ − C̄ C‖_F / ‖C‖_F², zero for real C."""
    C = C.matrix if isinstance(C, CoefficientMatrix) else np.asarray(C)
    norm = np.linalg.norm(C)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(C @ C.conj() - C.conj() @ C) / norm ** 2)


def random_psd(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Generic complex PSD matrix."""
    rank = rank or dim
    G = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    return G @ G.conj().T


def random_canonical_spec(sigma: np.ndarray, rng: np.random.Generator, density: float = 0.5,
                          gamma_range: Sequence[float] = (0.1, 1.0)) -> LindbladSpec:
    """
    Random QDB Lindbladian in canonical form: a random adjoint-closed subset
    of the modular basis with paired weights γ_α ∈ gamma_range.
    """
    mb = modular_basis(sigma)
    lattice = LatticeGeometry.for_dim(mb.operators.shape[1])
    sites = tuple(range(lattice.n))
    chosen = [a for a in range(1, len(mb)) if a <= mb.partner[a] and rng.random() < density]
    if not chosen:
        chosen = [int(rng.integers(1, len(mb)))]
        chosen = [min(chosen[0], int(mb.partner[chosen[0]]))]

    jumps = []
    for a in chosen:
        gamma = rng.uniform(*gamma_range)
        p = int(mb.partner[a])
        first = len(jumps)
        members = [a] if p == a else [a, p]
        for offset, b in enumerate(members):
            jumps.append(JumpTerm(mb.operators[b], sites, gamma * np.exp(-mb.frequencies[b] / 2),
                                  partner=first + len(members) - 1 - offset, label=mb.labels[b]))
    return LindbladSpec(lattice, tuple(jumps), k=lattice.n, name="random-canonical")
