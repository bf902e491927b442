"""
Model documents: versioned YAML descriptions of a Lindbladian and its
reference state, parsed into LindbladSpec objects and emitted back.

    format: lindblad-superham/v1
    kind: generic | classical | fermionic
    lattice: {n: 2, d: 2}
    jumps:
      - {op: sigma_minus, sites: [0], weight: 0.37, partner: 1}
      - {matrix: [[0, 0], [1, 0]], sites: [0], weight: 2.72, partner: 0}
    hamiltonian:
      - {op: [X, X], sites: [0, 1], coefficient: 0.5}
    sigma: {type: gibbs, beta: 1.0, terms: [{op: Z, sites: [0]}]}
    s: [0.0, 0.5, 1.0]
    seed: 0
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import yaml

from lindblad_superham.core.errors import SpecFormatError, SteadyStateError
from lindblad_superham.core.lindblad import HamiltonianTerm, JumpTerm, LindbladSpec, steady_states
from lindblad_superham.core.models import (
    ClassicalModelParams,
    FermionParams,
    build_classical,
    build_fermionic_manybody,
    classical_gibbs,
    gaussian_steady_state,
)
from lindblad_superham.core.operators import (
    NUMBER,
    PAULI,
    SIGMA_MINUS,
    SIGMA_PLUS,
    LatticeGeometry,
    embed,
    hermitian_function,
    kron_all,
)

FORMAT_TAG = "lindblad-superham/v1"
KINDS = ('generic', 'classical', 'fermionic')
SIGMA_SOURCES = ('matrix', 'diagonal', 'gibbs', 'gaussian', 'maximally_mixed', 'steady')

NAMED_OPS = {
    'I': PAULI['I'],
    'X': PAULI['X'],
    'Y': PAULI['Y'],
    'Z': PAULI['Z'],
    'sigma_minus': SIGMA_MINUS,
    'sigma_plus': SIGMA_PLUS,
    'number': NUMBER,
}

TOP_FIELDS = {'format', 'kind', 'name', 'lattice', 'jumps', 'hamiltonian', 'sigma', 's', 'seed',
              'classical', 'fermionic'}
JUMP_FIELDS = {'op', 'matrix', 'sites', 'weight', 'partner', 'label'}
TERM_FIELDS = {'op', 'matrix', 'sites', 'coefficient', 'label'}
SIGMA_FIELDS = {'type', 'matrix', 'diagonal', 'beta', 'terms'}
CLASSICAL_FIELDS = {'n', 'eps', 'mu', 'u', 'beta', 'gamma'}
FERMIONIC_FIELDS = {'n', 'gamma_in', 'gamma_out'}


# --- parsing helpers ---

def _mapping(value: Any, where: str) -> dict:
    if not isinstance(value, dict):
        raise SpecFormatError(f"{where}: expected a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(mapping: dict, allowed: Iterable[str], where: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise SpecFormatError(f"{where}: unknown field(s) {', '.join(map(str, unknown))}")


def parse_complex(value: Any, where: str = "entry") -> complex:
    """Number, 're+imj' string, or {re, im} mapping."""
    if isinstance(value, bool):
        raise SpecFormatError(f"{where}: booleans are not matrix entries")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(' ', ''))
        except ValueError:
            raise SpecFormatError(f"{where}: cannot read '{value}' as a complex number")
    if isinstance(value, dict):
        _reject_unknown(value, {'re', 'im'}, where)
        return complex(float(value.get('re', 0.0)), float(value.get('im', 0.0)))
    raise SpecFormatError(f"{where}: unsupported entry {value!r}")


def parse_matrix(rows: Any, where: str = "matrix") -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise SpecFormatError(f"{where}: expected a list of rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise SpecFormatError(f"{where}: ragged rows")
    return np.array([[parse_complex(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)]
                     for i, r in enumerate(rows)], dtype=complex)


def _named_operator(op: Any, d: int, where: str) -> np.ndarray:
    names = [op] if isinstance(op, str) else op
    if not isinstance(names, list) or not all(isinstance(name, str) for name in names):
        raise SpecFormatError(f"{where}: 'op' must be a name or a list of names")
    if d != 2:
        raise SpecFormatError(f"{where}: named operators are qubit operators, lattice has d={d}")
    unknown = [name for name in names if name not in NAMED_OPS]
    if unknown:
        raise SpecFormatError(f"{where}: unknown operator(s) {unknown}; known: {sorted(NAMED_OPS)}")
    return kron_all([NAMED_OPS[name] for name in names])


def _local_operator(entry: dict, d: int, where: str) -> Tuple[np.ndarray, Tuple[int, ...]]:
    if ('op' in entry) == ('matrix' in entry):
        raise SpecFormatError(f"{where}: give exactly one of 'op' or 'matrix'")
    sites = entry.get('sites')
    if not isinstance(sites, list) or not sites or not all(isinstance(s, int) for s in sites):
        raise SpecFormatError(f"{where}: 'sites' must be a nonempty list of integers")
    if 'op' in entry:
        matrix = _named_operator(entry['op'], d, where)
    else:
        matrix = parse_matrix(entry['matrix'], f"{where}.matrix")
    if matrix.shape != (d ** len(sites), d ** len(sites)):
        raise SpecFormatError(f"{where}: operator of shape {matrix.shape} on {len(sites)} site(s) of dim {d}")
    return matrix, tuple(sites)


def _jump_terms(entries: Any, d: int) -> List[JumpTerm]:
    if not isinstance(entries, list):
        raise SpecFormatError("jumps: expected a list")
    jumps = []
    for index, entry in enumerate(entries):
        where = f"jumps[{index}]"
        entry = _mapping(entry, where)
        _reject_unknown(entry, JUMP_FIELDS, where)
        matrix, sites = _local_operator(entry, d, where)
        partner = entry.get('partner')
        if partner is not None and (not isinstance(partner, int) or not 0 <= partner < len(entries)):
            raise SpecFormatError(f"{where}: partner {partner!r} is not a jump index")
        try:
            jumps.append(JumpTerm(matrix, sites, float(entry.get('weight', 1.0)), partner,
                                  str(entry.get('label', f"jump[{index}]"))))
        except (TypeError, ValueError) as e:
            raise SpecFormatError(f"{where}: {e}") from e
    return jumps


def _hamiltonian_terms(entries: Any, d: int, where: str = "hamiltonian") -> List[HamiltonianTerm]:
    if not isinstance(entries, list):
        raise SpecFormatError(f"{where}: expected a list")
    terms = []
    for index, entry in enumerate(entries):
        at = f"{where}[{index}]"
        entry = _mapping(entry, at)
        _reject_unknown(entry, TERM_FIELDS, at)
        matrix, sites = _local_operator(entry, d, at)
        coefficient = parse_complex(entry.get('coefficient', 1.0), f"{at}.coefficient")
        terms.append(HamiltonianTerm(coefficient * matrix, sites, str(entry.get('label', f"h[{index}]"))))
    return terms


def _s_values(value: Any) -> Tuple[float, ...]:
    values = value if isinstance(value, list) else [value]
    try:
        values = tuple(float(s) for s in values)
    except (TypeError, ValueError):
        raise SpecFormatError(f"s: expected numbers, got {value!r}")
    if not values or any(not 0.0 <= s <= 1.0 for s in values):
        raise SpecFormatError(f"s: values must lie in [0, 1], got {list(values)}")
    return values


def _classical_params(block: Any) -> ClassicalModelParams:
    block = _mapping(block, "classical")
    _reject_unknown(block, CLASSICAL_FIELDS, "classical")
    if 'n' not in block:
        raise SpecFormatError("classical: 'n' is required")
    try:
        return ClassicalModelParams(int(block['n']), np.asarray(block.get('eps', 1.0), dtype=float),
                                    float(block.get('mu', 0.0)), float(block.get('u', 0.5)),
                                    float(block.get('beta', 1.0)),
                                    None if block.get('gamma') is None else np.asarray(block['gamma'], dtype=float))
    except (TypeError, ValueError) as e:
        raise SpecFormatError(f"classical: {e}") from e


def _fermion_params(block: Any) -> FermionParams:
    block = _mapping(block, "fermionic")
    _reject_unknown(block, FERMIONIC_FIELDS, "fermionic")
    if 'n' not in block:
        raise SpecFormatError("fermionic: 'n' is required")
    try:
        gamma_in = tuple(float(g) for g in block.get('gamma_in', (3.0, 1.0)))
        gamma_out = tuple(float(g) for g in block.get('gamma_out', (2.0, 0.5)))
        if len(gamma_in) != 2 or len(gamma_out) != 2:
            raise ValueError("rates are (γ_0, γ_1) pairs")
        return FermionParams(int(block['n']), gamma_in, gamma_out)
    except (TypeError, ValueError) as e:
        raise SpecFormatError(f"fermionic: {e}") from e


# --- document ---

@dataclass(frozen=True)
class ModelDocument:
    kind: str
    name: str
    spec: LindbladSpec = field(repr=False)
    sigma_source: dict
    s_values: Tuple[float, ...] = (1.0,)
    seed: int = 0
    classical: Optional[ClassicalModelParams] = field(default=None, repr=False)
    fermionic: Optional[FermionParams] = field(default=None, repr=False)

    @property
    def lattice(self) -> LatticeGeometry:
        return self.spec.lattice

    def resolve_sigma(self, override: Optional[str] = None) -> np.ndarray:
        """
        The reference state named by the document, or by `override`: a source
        keyword or a path to a .npy matrix.
        """
        source = dict(self.sigma_source)
        if override:
            if override in SIGMA_SOURCES:
                source = {'type': override} if override != source.get('type') else source
            else:
                path = Path(override)
                if path.suffix != '.npy':
                    raise SpecFormatError(f"--sigma must be one of {SIGMA_SOURCES} or a .npy file, got {override}")
                source = {'type': 'matrix', 'array': np.load(path)}
        return _sigma_from_source(self, source)


def _default_sigma(kind: str) -> dict:
    return {'type': {'classical': 'gibbs', 'fermionic': 'gaussian'}.get(kind, 'steady')}


def _sigma_block(value: Any, kind: str) -> dict:
    if value is None:
        return _default_sigma(kind)
    if isinstance(value, str):
        value = {'type': value}
    value = _mapping(value, "sigma")
    _reject_unknown(value, SIGMA_FIELDS, "sigma")
    if value.get('type') not in SIGMA_SOURCES:
        raise SpecFormatError(f"sigma: type must be one of {SIGMA_SOURCES}, got {value.get('type')!r}")
    return value


def _sigma_from_source(document: ModelDocument, source: dict) -> np.ndarray:
    lattice = document.lattice
    N = lattice.dim
    kind = source['type']
    if kind == 'matrix':
        sigma = source['array'] if 'array' in source else parse_matrix(source.get('matrix'), "sigma.matrix")
        sigma = np.asarray(sigma, dtype=complex)
        if sigma.shape != (N, N):
            raise SpecFormatError(f"sigma: matrix of shape {sigma.shape} on a lattice of dim {N}")
        return sigma
    if kind == 'diagonal':
        diagonal = np.array([parse_complex(v, "sigma.diagonal").real for v in source.get('diagonal') or []])
        if diagonal.size != N:
            raise SpecFormatError(f"sigma: diagonal of length {diagonal.size} on a lattice of dim {N}")
        return np.diag(diagonal / diagonal.sum()).astype(complex)
    if kind == 'maximally_mixed':
        return np.eye(N, dtype=complex) / N
    if kind == 'gibbs':
        if document.classical is not None and 'terms' not in source:
            return classical_gibbs(document.classical)
        terms = _hamiltonian_terms(source.get('terms', []), lattice.d, "sigma.terms")
        beta = float(source.get('beta', 1.0))
        H = sum((embed(t.matrix, t.sites, lattice) for t in terms), np.zeros((N, N), dtype=complex))
        weights = hermitian_function(H, lambda w: np.exp(-beta * (w - w.min())))
        return weights / np.trace(weights).real
    if kind == 'gaussian':
        if document.fermionic is None:
            raise SpecFormatError("sigma: 'gaussian' needs a fermionic model")
        return gaussian_steady_state(document.fermionic)
    report = steady_states(document.spec)
    if not report.unique:
        raise SteadyStateError(f"sigma: 'steady' needs a unique steady state, kernel has dim {report.kernel_dim}")
    return report.state


def parse_document(data: Any) -> ModelDocument:
    """Validate a loaded YAML mapping and build its LindbladSpec."""
    data = _mapping(data, "document")
    _reject_unknown(data, TOP_FIELDS, "document")
    if data.get('format') != FORMAT_TAG:
        raise SpecFormatError(f"Unsupported format tag {data.get('format')!r}, expected '{FORMAT_TAG}'")
    kind = data.get('kind', 'generic')
    if kind not in KINDS:
        raise SpecFormatError(f"kind must be one of {KINDS}, got {kind!r}")
    for other in set(KINDS[1:]) - {kind}:
        if other in data:
            raise SpecFormatError(f"'{other}' block is only allowed with kind: {other}")

    classical = fermionic = None
    if kind == 'generic':
        lattice_block = _mapping(data.get('lattice'), "lattice")
        _reject_unknown(lattice_block, {'n', 'd'}, "lattice")
        try:
            lattice = LatticeGeometry(int(lattice_block['n']), int(lattice_block.get('d', 2)))
        except (KeyError, TypeError, ValueError) as e:
            raise SpecFormatError(f"lattice: {e}") from e
        jumps = _jump_terms(data.get('jumps', []), lattice.d)
        hamiltonian = _hamiltonian_terms(data.get('hamiltonian', []), lattice.d)
        try:
            spec = LindbladSpec(lattice, tuple(jumps), tuple(hamiltonian), name=str(data.get('name', 'generic')))
        except ValueError as e:
            raise SpecFormatError(f"Invalid model: {e}") from e
    else:
        present = [key for key in ('lattice', 'jumps', 'hamiltonian') if key in data]
        if present:
            raise SpecFormatError(f"kind: {kind} builds its own terms; remove {present}")
        if kind not in data:
            raise SpecFormatError(f"kind: {kind} needs a '{kind}' block")
        if kind == 'classical':
            classical = _classical_params(data['classical'])
            spec, _ = build_classical(classical)
        else:
            fermionic = _fermion_params(data['fermionic'])
            spec = build_fermionic_manybody(fermionic)

    seed = data.get('seed', 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SpecFormatError(f"seed must be an integer, got {seed!r}")
    document = ModelDocument(kind, str(data.get('name', spec.name)), spec, _sigma_block(data.get('sigma'), kind),
                             _s_values(data.get('s', [1.0])), seed, classical, fermionic)
    logging.info(f"Parsed {kind} model '{document.name}': {len(spec.jumps)} jumps, "
                 f"{len(spec.hamiltonian)} Hamiltonian terms on {spec.lattice.n} sites")
    return document


def load_document(path) -> ModelDocument:
    with open(path, 'r') as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise SpecFormatError(f"{path}: not valid YAML ({e})") from e
    return parse_document(data)


# --- emission ---

def encode_complex(value: complex):
    value = complex(value)
    return value.real if value.imag == 0 else f"{value.real!r}{value.imag:+}j"


def encode_matrix(matrix: np.ndarray) -> List[list]:
    return [[encode_complex(v) for v in row] for row in np.asarray(matrix)]


def classical_document(params: ClassicalModelParams, name: str = "classical",
                       s_values: Tuple[float, ...] = (0.0, 0.5, 1.0)) -> dict:
    block = {'n': params.n, 'eps': [float(e) for e in params.eps], 'mu': params.mu, 'u': params.u,
             'beta': params.beta}
    if not np.all(params.gamma == 1.0):
        block['gamma'] = params.gamma.tolist()
    return {'format': FORMAT_TAG, 'kind': 'classical', 'name': name, 'classical': block,
            'sigma': 'gibbs', 's': list(s_values), 'seed': 0}


def fermionic_document(params: FermionParams, name: str = "fermionic",
                       s_values: Tuple[float, ...] = (0.0, 0.5, 1.0)) -> dict:
    return {'format': FORMAT_TAG, 'kind': 'fermionic', 'name': name,
            'fermionic': {'n': params.n, 'gamma_in': list(params.gamma_in), 'gamma_out': list(params.gamma_out)},
            'sigma': 'gaussian', 's': list(s_values), 'seed': 0}


def generic_document(spec: LindbladSpec, sigma: Optional[dict] = None,
                     s_values: Tuple[float, ...] = (1.0,)) -> dict:
    """Document with every term written out as explicit matrix entries."""
    jumps = [{'matrix': encode_matrix(t.matrix), 'sites': list(t.sites), 'weight': t.weight,
              'partner': t.partner, 'label': t.label} for t in spec.jumps]
    hamiltonian = [{'matrix': encode_matrix(t.matrix), 'sites': list(t.sites), 'label': t.label}
                   for t in spec.hamiltonian]
    document = {'format': FORMAT_TAG, 'kind': 'generic', 'name': spec.name,
                'lattice': {'n': spec.lattice.n, 'd': spec.lattice.d}, 'jumps': jumps}
    if hamiltonian:
        document['hamiltonian'] = hamiltonian
    document['sigma'] = sigma or {'type': 'steady'}
    document['s'] = list(s_values)
    document['seed'] = 0
    return document


def thermal_qubits_document(n: int = 2, beta: float = 1.0, gamma: float = 1.0) -> dict:
    """Independent thermal qubits: σ⁻/σ⁺ on each site against σ ∝ exp(−β Σ Z_i)."""
    jumps = []
    for site in range(n):
        first = len(jumps)
        jumps.append({'op': 'sigma_minus', 'sites': [site], 'weight': float(gamma * np.exp(-beta)),
                      'partner': first + 1, 'label': f"lower[{site}]"})
        jumps.append({'op': 'sigma_plus', 'sites': [site], 'weight': float(gamma * np.exp(beta)),
                      'partner': first, 'label': f"raise[{site}]"})
    return {'format': FORMAT_TAG, 'kind': 'generic', 'name': f"thermal qubits n={n}",
            'lattice': {'n': n, 'd': 2}, 'jumps': jumps,
            'sigma': {'type': 'gibbs', 'beta': beta, 'terms': [{'op': 'Z', 'sites': [s]} for s in range(n)]},
            's': [0.0, 0.5, 1.0], 'seed': 0}


def example_documents() -> Dict[str, dict]:
    """Ready-to-run documents for the bundled models."""
    return {
        'classical_uniform': classical_document(ClassicalModelParams.uniform(4, eps=1.0, u=0.5),
                                                "classical uniform eps=1"),
        'classical_alternating': classical_document(ClassicalModelParams.alternating(4),
                                                    "classical alternating eps=1,10"),
        'fermionic': fermionic_document(FermionParams(4, (3.0, 1.0), (2.0, 0.5)), "fermionic gapped"),
        'thermal_qubits': thermal_qubits_document(),
    }


def dump_document(document: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        yaml.safe_dump(document, f, sort_keys=False)
    logging.info(f"📄 Wrote {path}")
    return path
