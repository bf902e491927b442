"""
Dense operator algebra on a ring of qudits.

Tensor factors follow the site order, site 0 being the slowest index, and
operators are vectorized row-major, so that vec(A X B) = (A ⊗ B^T) vec(X).
"""
import itertools
import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy import sparse

from lindblad_superham.core.errors import DimensionError, SingularStateError, SpectrumError

HERMITIAN_TOL = 1e-10
CLAMP_TOL = 1e-12

PAULI = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}
# |0><1|: lowers an occupied site
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
NUMBER = np.diag([0.0, 1.0]).astype(complex)

# Type alias: a dense complex square matrix acting on the lattice Hilbert space.
OperatorMatrix = np.ndarray


@dataclass(frozen=True)
class LatticeGeometry:
    """Ring of n sites with local dimension d."""
    n: int
    d: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Lattice needs at least one site, got n={self.n}")
        if self.d < 2:
            raise ValueError(f"Local dimension must be at least 2, got d={self.d}")

    @property
    def dim(self) -> int:
        return self.d ** self.n

    def check_site(self, site: int) -> int:
        if not 0 <= int(site) < self.n:
            raise ValueError(f"Site {site} out of range for a ring of {self.n} sites")
        return int(site)

    def dist(self, i: int, j: int) -> int:
        gap = abs(self.check_site(i) - self.check_site(j))
        return min(gap, self.n - gap)

    def support_dist(self, a: Sequence[int], b: Sequence[int]) -> int:
        """Smallest ring distance between two supports (0 if they overlap or one is empty)."""
        if len(a) == 0 or len(b) == 0:
            return 0
        return min(self.dist(i, j) for i in a for j in b)

    def window(self, start: int, size: int) -> Tuple[int, ...]:
        if not 1 <= size <= self.n:
            raise ValueError(f"Window size {size} invalid for n={self.n}")
        return tuple((start + offset) % self.n for offset in range(size))

    def is_contiguous(self, sites: Sequence[int]) -> bool:
        """True when the sites form one arc of the ring."""
        members = {self.check_site(s) for s in sites}
        if len(members) in (0, self.n):
            return True
        starts = [s for s in members if (s - 1) % self.n not in members]
        return len(starts) == 1

    def arc(self, sites: Sequence[int]) -> Tuple[int, ...]:
        """Sites of a contiguous set listed along the ring, starting after the gap."""
        members = {self.check_site(s) for s in sites}
        if len(members) == self.n:
            return tuple(range(self.n))
        if not self.is_contiguous(members):
            raise ValueError(f"Sites {sorted(members)} are not contiguous on the ring")
        start = next(s for s in members if (s - 1) % self.n not in members)
        return self.window(start, len(members))

    def doubled(self) -> "LatticeGeometry":
        """Row sites 0..n-1 followed by column sites n..2n-1 of a vectorized operator."""
        return LatticeGeometry(2 * self.n, self.d)

    @classmethod
    def for_dim(cls, dim: int, d: int = 2) -> "LatticeGeometry":
        n = int(round(np.log(dim) / np.log(d)))
        if d ** n != dim:
            raise DimensionError(f"Dimension {dim} is not a power of {d}")
        return cls(n, d)


def vec(op: OperatorMatrix) -> np.ndarray:
    return np.asarray(op).reshape(-1)


def unvec(vector: np.ndarray, dim: Optional[int] = None) -> OperatorMatrix:
    vector = np.asarray(vector)
    dim = dim or int(round(np.sqrt(vector.size)))
    return vector.reshape(dim, dim)


def superop_from_products(left: OperatorMatrix, right: OperatorMatrix) -> np.ndarray:
    """Matrix of X ↦ left · X · right."""
    return np.kron(left, np.asarray(right).T)


def _check_square(op, name="operator") -> np.ndarray:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {op.shape}")
    return op


def _site_permutation(sites: Tuple[int, ...], lattice: LatticeGeometry) -> np.ndarray:
    """Index map from (sites, rest) ordering to natural lattice ordering."""
    rest = [s for s in range(lattice.n) if s not in sites]
    order = list(sites) + rest
    return np.arange(lattice.dim).reshape([lattice.d] * lattice.n).transpose(order).reshape(-1)


def embed(local_op: OperatorMatrix, sites: Sequence[int], lattice: LatticeGeometry,
          sparse_output: bool = False):
    """
    Place local_op on the given sites (in the given order) and identity elsewhere.

    Returns a dense array, or a CSR matrix when sparse_output is set.
    """
    sites = tuple(lattice.check_site(s) for s in sites)
    if len(set(sites)) != len(sites):
        raise ValueError(f"Repeated site in support {sites}")
    local = _check_square(local_op, "local operator")
    expected = lattice.d ** len(sites)
    if local.shape[0] != expected:
        raise DimensionError(f"Local operator has dim {local.shape[0]}, support {sites} needs {expected}")

    perm = _site_permutation(sites, lattice)
    rest_dim = lattice.dim // expected
    if sparse_output:
        block = sparse.kron(sparse.csr_matrix(local), sparse.identity(rest_dim, format='csr'), format='coo')
        return sparse.csr_matrix((block.data, (perm[block.row], perm[block.col])),
                                 shape=(lattice.dim, lattice.dim))
    block = np.kron(local, np.eye(rest_dim))
    full = np.zeros((lattice.dim, lattice.dim), dtype=np.result_type(local, complex))
    full[np.ix_(perm, perm)] = block
    return full


def embed_superop(local_superop: np.ndarray, sites: Sequence[int], lattice: LatticeGeometry,
                  sparse_output: bool = False):
    """
    Place a superoperator acting on the operators of `sites` into the full
    vectorized space of `lattice`.
    """
    sites = [lattice.check_site(s) for s in sites]
    doubled_sites = sites + [lattice.n + s for s in sites]
    return embed(local_superop, doubled_sites, lattice.doubled(), sparse_output=sparse_output)


def partial_trace(op: OperatorMatrix, keep: Sequence[int], lattice: LatticeGeometry) -> OperatorMatrix:
    """
    Trace out every site not in keep. The kept factors appear in the order given.
    An empty keep returns the full trace as a 1×1 matrix.
    """
    op = _check_square(op)
    if op.shape[0] != lattice.dim:
        raise DimensionError(f"Operator dim {op.shape[0]} does not match lattice dim {lattice.dim}")
    keep = [lattice.check_site(s) for s in keep]
    if len(set(keep)) != len(keep):
        raise ValueError(f"Repeated site in keep set {keep}")
    rest = [s for s in range(lattice.n) if s not in keep]
    n, d = lattice.n, lattice.d
    perm = keep + rest + [n + s for s in keep] + [n + s for s in rest]
    kept_dim = d ** len(keep)
    rest_dim = d ** len(rest)
    tensor = op.reshape([d] * (2 * n)).transpose(perm).reshape(kept_dim, rest_dim, kept_dim, rest_dim)
    return np.einsum('ajbj->ab', tensor)


def hermitian_residual(op: OperatorMatrix) -> float:
    op = np.asarray(op)
    return float(np.max(np.abs(op - op.conj().T))) if op.size else 0.0


def _hermitian_eigh(A: OperatorMatrix) -> Tuple[np.ndarray, np.ndarray]:
    A = _check_square(A)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if hermitian_residual(A) > HERMITIAN_TOL * scale:
        raise ValueError(f"Matrix is not Hermitian (residual {hermitian_residual(A):.2e})")
    return la.eigh((A + A.conj().T) / 2)


def hermitian_function(A: OperatorMatrix, fn: Callable[[np.ndarray], np.ndarray]) -> OperatorMatrix:
    """Apply a scalar function to a Hermitian matrix through its eigendecomposition."""
    w, V = _hermitian_eigh(A)
    return (V * fn(w)) @ V.conj().T


def hermitian_power(A: OperatorMatrix, x: float, rel_cutoff: float = 0.0) -> OperatorMatrix:
    """
    A^x for Hermitian PSD A. Eigenvalues down to -1e-12 are clamped to zero,
    as are those at or below rel_cutoff·λ_max; negative x requires a strictly
    positive spectrum.
    """
    w, V = _hermitian_eigh(A)
    if w.size and w.min() < -CLAMP_TOL:
        raise ValueError(f"Matrix has negative eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    if rel_cutoff > 0 and w.size:
        w = np.where(w <= rel_cutoff * w.max(), 0.0, w)
    if x < 0 and (w.size == 0 or w.min() <= 0):
        raise SingularStateError(f"Negative power {x} of a singular matrix")
    return (V * w ** x) @ V.conj().T


def general_spectrum(M: np.ndarray) -> np.ndarray:
    """All eigenvalues with multiplicity, sorted by (Re, Im)."""
    M = _check_square(M, "matrix")
    if not np.all(np.isfinite(M)):
        raise SpectrumError("Matrix has non-finite entries")
    try:
        w = la.eigvals(M)
    except la.LinAlgError as e:
        raise SpectrumError(f"Eigen-solver failed: {e}") from e
    if not np.all(np.isfinite(w)):
        raise SpectrumError("Eigen-solver returned non-finite eigenvalues")
    return w[np.lexsort((w.imag, w.real))]


def operator_norm(M) -> float:
    M = np.asarray(M)
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def trace_norm(M) -> float:
    """Schatten-1 norm; Hermitian input uses its eigenvalues."""
    M = np.asarray(M)
    if hermitian_residual(M) <= HERMITIAN_TOL * max(1.0, float(np.max(np.abs(M)))):
        return float(np.sum(np.abs(la.eigvalsh((M + M.conj().T) / 2))))
    return float(np.sum(la.svdvals(M)))


def hs_inner(A, B) -> complex:
    """Hilbert-Schmidt inner product Tr(A† B)."""
    return complex(np.vdot(np.asarray(A), np.asarray(B)))


def random_hermitian(dim: int, rng: np.random.Generator) -> OperatorMatrix:
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (G + G.conj().T) / 2


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> OperatorMatrix:
    """Ginibre-distributed density matrix; full rank unless rank is given."""
    rank = rank or dim
    G = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


@dataclass(frozen=True)
class HermitianOperatorBasis:
    """Orthonormal Hermitian operators with their site supports."""
    lattice: LatticeGeometry
    elements: Tuple[np.ndarray, ...] = field(repr=False)
    supports: Tuple[Tuple[int, ...], ...]
    labels: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def identity_index(self) -> Optional[int]:
        for index, support in enumerate(self.supports):
            if len(support) == 0:
                return index
        return None

    def stacked(self) -> np.ndarray:
        return np.stack(self.elements)

    def gram(self) -> np.ndarray:
        flat = self.stacked().reshape(len(self), -1)
        return flat.conj() @ flat.T

    def coefficients(self, op: OperatorMatrix) -> np.ndarray:
        """Expansion coefficients Tr(P_a op)."""
        flat = self.stacked().reshape(len(self), -1)
        return flat.conj() @ vec(op)

    def reconstruct(self, coefficients: np.ndarray) -> OperatorMatrix:
        return np.tensordot(np.asarray(coefficients), self.stacked(), axes=1)


def _pauli_label(letters: str) -> str:
    parts = [f"{p}{site}" for site, p in enumerate(letters) if p != 'I']
    return " ".join(parts) if parts else "I"


def pauli_basis(lattice: LatticeGeometry, k: int) -> HermitianOperatorBasis:
    """
    Normalized Pauli strings supported on contiguous windows of at most k sites,
    each distinct embedded operator listed once, identity first.
    """
    if lattice.d != 2:
        raise ValueError("Pauli bases are only defined for qubits (d = 2)")
    if not 1 <= k <= lattice.n:
        raise ValueError(f"Support size k={k} must lie in 1..{lattice.n}")

    starts = range(1) if k == lattice.n else range(lattice.n)
    strings = {}
    for start in starts:
        window = lattice.window(start, k)
        for letters in itertools.product('IXYZ', repeat=k):
            full = ['I'] * lattice.n
            for site, letter in zip(window, letters):
                full[site] = letter
            label = ''.join(full)
            if label not in strings:
                strings[label] = tuple(s for s in range(lattice.n) if full[s] != 'I')

    ordered = sorted(strings, key=lambda lab: (len(strings[lab]), strings[lab], lab))
    norm = np.sqrt(2.0 ** lattice.n)
    elements = tuple(reduce(np.kron, [PAULI[p] for p in lab]) / norm for lab in ordered)
    logging.debug(f"Pauli basis for n={lattice.n}, k={k}: {len(elements)} elements")
    return HermitianOperatorBasis(
        lattice=lattice,
        elements=elements,
        supports=tuple(strings[lab] for lab in ordered),
        labels=tuple(_pauli_label(lab) for lab in ordered),
    )


def kron_all(ops: List[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, ops, np.eye(1, dtype=complex))
