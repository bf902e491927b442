import argparse
import copy
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from lindblad_superham.core.entanglement import op_space_entropy, truncation_curve, vectorize_state
from lindblad_superham.core.errors import CheckLedger, classify_error
from lindblad_superham.core.knabe import (
    DEFAULT_U_VALUES,
    certify_classical,
    classical_pair_gap,
    knabe_table,
)
from lindblad_superham.core.lindblad import (
    DEFAULT_MAX_SUPEROP_DIM,
    assemble,
    evolve,
    normalize_jumps,
    spectrum_and_gap,
    steady_states,
    validate,
)
from lindblad_superham.core.models import (
    ClassicalModelParams,
    FermionParams,
    fermionic_super_h_coeffs,
    hopping_coefficients,
)
from lindblad_superham.core.operators import (
    LatticeGeometry,
    operator_norm,
    pauli_basis,
    random_density_matrix,
    trace_norm,
)
from lindblad_superham.core.paths import get_config_path, get_output_dir
from lindblad_superham.core.qdb import commutator_check, gks_matrix, modular_basis, qdb_residual
from lindblad_superham.core.spec_io import dump_document, example_documents, load_document
from lindblad_superham.core.super_hamiltonian import (
    ROUTE_ALIASES,
    ROUTES,
    decay_profile,
    hopping_matrix,
    map_basis,
    map_dense,
    map_local_jumps,
    resolve_route,
    verify_mapping,
)
from lindblad_superham.core.utils import (
    complex_columns,
    setup_logging,
    write_csv_table,
    write_matrix_csv,
    write_summary,
)

DEFAULT_CONFIG = {
    'app': {'out_dir': None},
    'logging': {'level': 'INFO', 'file': None},
    'tolerances': {
        'qdb': 1e-8,
        'route': 1e-9,
        'spectrum_match': 1e-8,
        'trace': 1e-10,
        'kernel': 1e-8,
        'purification': 1e-9,
    },
    'limits': {'max_superop_dim': DEFAULT_MAX_SUPEROP_DIM},
    'knabe': {
        'beta': 1.0,
        'n': 4,
        'instances': 100,
        'seed': 0,
        'u_values': list(DEFAULT_U_VALUES),
        'certify_sites': [4, 5, 6],
    },
    'decay': {'n': 100, 'gamma_in': [3.0, 1.0], 'gamma_out': [2.0, 0.5], 'fit_max': None},
    'entanglement': {'bond_dims': [1, 2, 4, 8, 16]},
}


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path):
    if not path or not os.path.exists(path):
        # Return a safe default skeleton
        return copy.deepcopy(DEFAULT_CONFIG)
    with open(path, 'r') as f:
        return _deep_merge(DEFAULT_CONFIG, yaml.safe_load(f) or {})


def _floats(text):
    return [float(v) for v in str(text).split(',') if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(',') if v.strip()]


def _out_dir(args, config, command: str) -> Path:
    requested = args.out_dir or os.getenv("SUPERHAM_OUT_DIR") or config['app'].get('out_dir')
    path = get_output_dir(requested) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(out_dir: Path, command: str, ledger: CheckLedger, tolerances: dict, extra: dict = None) -> int:
    write_summary(out_dir / "summary.yaml", command, ledger, tolerances, extra)
    print(ledger.format_stats_summary())
    return 0 if ledger.passed else 1


def _load(args, config):
    document = load_document(args.spec)
    generator = assemble(document.spec, config['limits']['max_superop_dim'])
    return document, generator


# --- commands ---

def cmd_check_qdb(args, config) -> int:
    document, generator = _load(args, config)
    sigma = document.resolve_sigma(args.sigma)
    s_values = _floats(args.s) if args.s else list(document.s_values)
    tol = args.tol if args.tol is not None else config['tolerances']['qdb']
    out_dir = _out_dir(args, config, "check-qdb")

    ledger = CheckLedger(f"check-qdb {document.name}")
    rows = []
    for s in s_values:
        residual = qdb_residual(generator, sigma, s)
        passed = ledger.record("qdb1", residual.qdb1, tol, f"s={s:g}")
        passed = ledger.record("qdb2", residual.qdb2, tol, f"s={s:g}") and passed
        rows.append((s, residual.qdb1, residual.qdb2, passed))
        print(f"s={s:g}: qdb1={residual.qdb1:.3e} qdb2={residual.qdb2:.3e}")
    write_csv_table(out_dir / "qdb_residuals.csv",
                    ["s", "qdb1 [relative]", "qdb2 [relative]", "passed"], rows)

    commutator = commutator_check(gks_matrix(generator, modular_basis(sigma)))
    print(f"[C,C*] residual in the modular basis: {commutator:.3e}")
    return _finish(out_dir, "check-qdb", ledger, {'qdb': tol},
                   {'commutator_residual': commutator, 's_values': s_values})


def _route_hamiltonian(route, document, generator, sigma, s, config):
    if route == 'dense':
        return map_dense(generator, sigma, s, config['tolerances']['qdb']), None
    if route == 'jumps':
        return map_local_jumps(normalize_jumps(document.spec)), None
    C = gks_matrix(generator, pauli_basis(document.lattice, document.spec.k))
    return map_basis(C), C


def cmd_map(args, config) -> int:
    document, generator = _load(args, config)
    sigma = document.resolve_sigma(args.sigma)
    s = _floats(args.s)[0] if args.s else document.s_values[0]
    route = resolve_route(args.route)
    tol = args.tol if args.tol is not None else config['tolerances']['spectrum_match']
    out_dir = _out_dir(args, config, "map")

    H, C = _route_hamiltonian(route, document, generator, sigma, s, config)
    verification = verify_mapping(generator, H, sigma, tol)
    ledger = CheckLedger(f"map {document.name} ({route})").merge(verification.ledger)

    eigenvalues = np.linalg.eigvalsh((H.matrix + H.matrix.conj().T) / 2)
    write_csv_table(out_dir / "super_hamiltonian_spectrum.csv", ["index", "eigenvalue [eigenvalue]"],
                    enumerate(eigenvalues))

    scale = max(operator_norm(generator.matrix), np.finfo(float).tiny)
    extra = {'route': route, 'route_requested': args.route, 's': s, 'gap': verification.gap_hamiltonian}
    N = document.lattice.dim
    if np.linalg.norm(sigma - np.trace(sigma) * np.eye(N) / N) <= 1e-12:
        negated = operator_norm(H.matrix + generator.matrix) / scale
        ledger.record("negated_generator", negated, tol, route)
        extra['equals_negated_generator'] = negated <= tol
    if route != 'dense' and qdb_residual(generator, sigma, s).qdb1 <= config['tolerances']['qdb']:
        reference, _ = _route_hamiltonian('dense', document, generator, sigma, s, config)
        ledger.record("route_agreement", operator_norm(H.matrix - reference.matrix) / scale,
                      config['tolerances']['route'], f"{route} vs dense")
        print(f"Routes {route} and dense agree to {ledger.value('route_agreement'):.3e}")

    profile = None
    if document.fermionic is not None:
        M = hopping_coefficients(H.matrix, document.lattice.n)
        model = document.fermionic.model()
        profile = decay_profile(M, [(i,) for i in range(document.lattice.n)], document.lattice, k=2,
                                coefficients=np.concatenate([model.gamma_in, model.gamma_out]))
    elif C is not None and C.supports is not None:
        profile = decay_profile(hopping_matrix(C), C.supports, document.lattice, k=document.spec.k,
                                coefficients=C.matrix)
    if profile is not None:
        _write_profile(out_dir / "decay_profile.csv", profile)
        extra['decay_rate'] = profile.rate
        extra['preferred_fit'] = profile.preferred_fit
        extra['decay_constants'] = {'J': profile.coupling, 'c1': profile.c1, 'c2': profile.c2}
    return _finish(out_dir, "map", ledger, {'spectrum_match': tol, 'route': config['tolerances']['route']}, extra)


def _write_profile(path, profile, hopping_bound=None):
    header = ["distance [site distance]", "max_entry [amplitude]", "locality_bound [amplitude]"]
    columns = [profile.distances, profile.maxima, profile.bound]
    if np.isfinite(profile.c1):
        header.append("coupling_fit [amplitude]")
        columns.append(profile.coupling_curve())
    if hopping_bound is not None:
        header.append("hopping_bound [amplitude]")
        columns.append(hopping_bound)
    write_csv_table(path, header, zip(*columns))


def cmd_spectrum(args, config) -> int:
    document, generator = _load(args, config)
    out_dir = _out_dir(args, config, "spectrum")
    report = spectrum_and_gap(generator)
    write_csv_table(out_dir / "spectrum.csv", ["index"] + complex_columns("lambda", "eigenvalue"),
                    [(i, v.real, v.imag) for i, v in enumerate(report.eigenvalues)])
    ledger = validate(document.spec, seed=args.seed if args.seed is not None else document.seed)
    print(f"Gap {report.gap:.6e} with {report.steady_state_count} zero eigenvalue(s)")
    return _finish(out_dir, "spectrum", ledger, {'zero_threshold': report.zero_threshold},
                   {'gap': report.gap, 'zero_eigenvalues': report.steady_state_count,
                    'max_real': report.max_real})


def cmd_steady_state(args, config) -> int:
    document, generator = _load(args, config)
    out_dir = _out_dir(args, config, "steady-state")
    tol = args.tol if args.tol is not None else config['tolerances']['kernel']
    report = steady_states(generator)
    state = report.state
    ledger = CheckLedger(f"steady-state {document.name}")
    ledger.record_flag("unique_kernel", report.unique, document.name, value=report.kernel_dim)
    ledger.record("stationarity", np.linalg.norm(generator.apply(state)), tol, document.name)
    write_matrix_csv(out_dir / "steady_state.csv", state)

    extra = {'kernel_dim': report.kernel_dim}
    if document.sigma_source.get('type') != 'steady' or args.sigma:
        sigma = document.resolve_sigma(args.sigma)
        distance = trace_norm(state - sigma)
        ledger.record("matches_sigma", distance, tol, document.sigma_source.get('type', 'sigma'))
        extra['trace_distance_to_sigma'] = distance
    return _finish(out_dir, "steady-state", ledger, {'kernel': tol}, extra)


def _initial_state(choice, lattice: LatticeGeometry, seed: int) -> np.ndarray:
    N = lattice.dim
    if choice in (None, 'maximally_mixed'):
        return np.eye(N, dtype=complex) / N
    if choice == 'zero':
        rho = np.zeros((N, N), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    if choice == 'random':
        return random_density_matrix(N, np.random.default_rng(seed))
    rho = np.asarray(np.load(choice), dtype=complex)
    if rho.shape != (N, N):
        raise ValueError(f"Initial state of shape {rho.shape} on a lattice of dim {N}")
    return rho


def cmd_evolve(args, config) -> int:
    document, generator = _load(args, config)
    out_dir = _out_dir(args, config, "evolve")
    tol = args.tol if args.tol is not None else config['tolerances']['trace']
    times = _floats(args.t) if args.t else [0.0, 0.5, 1.0, 2.0, 5.0]
    seed = args.seed if args.seed is not None else document.seed
    rho0 = _initial_state(args.initial, document.lattice, seed)
    steady = steady_states(generator)
    reference = steady.state if steady.unique else None

    ledger = CheckLedger(f"evolve {document.name}")
    rows, distances = [], []
    for t in sorted(times):
        rho = evolve(generator, rho0, t)
        trace = float(np.trace(rho).real)
        ledger.record("trace_preservation", abs(trace - 1.0), tol, f"t={t:g}")
        distance = trace_norm(rho - reference) if reference is not None else float('nan')
        distances.append(distance)
        rows.append((t, trace, float(np.trace(rho @ rho).real), distance))
    if reference is not None:
        increases = np.diff(distances)
        ledger.record("contraction", max(0.0, float(increases.max())) if increases.size else 0.0,
                      config['tolerances']['kernel'], "distance to steady state")
    write_csv_table(out_dir / "evolution.csv",
                    ["t [time]", "trace", "purity", "distance_to_steady [trace norm]"], rows)
    return _finish(out_dir, "evolve", ledger, {'trace': tol})


def cmd_entanglement(args, config) -> int:
    document, _ = _load(args, config)
    out_dir = _out_dir(args, config, "entanglement")
    sigma = document.resolve_sigma(args.sigma)
    lattice = document.lattice
    sizes = _ints(args.cuts) if args.cuts else list(range(1, lattice.n))
    bond_dims = _ints(args.bond_dims) if args.bond_dims else config['entanglement']['bond_dims']
    tol = config['tolerances']['purification']

    ledger = CheckLedger(f"entanglement {document.name}")
    state = vectorize_state(sigma, lattice)
    ledger.record("purification_samples", state.sample_residual, tol, document.name)
    reduced = state.reduced_state()
    ledger.record("purification_partial_trace", np.max(np.abs(reduced - sigma)), tol, document.name)

    rows = []
    for size in sizes:
        report = op_space_entropy(sigma, list(range(size)), lattice, state)
        ledger.record_flag("mutual_information_bound", report.bound_satisfied, f"cut={size}",
                           value=report.mutual_information - 2 * report.entropy)
        rows.append((size, report.entropy, report.mutual_information, 2 * report.entropy,
                     report.capacity(lattice)))
    write_csv_table(out_dir / "entanglement.csv",
                    ["cut_size [sites]", "op_space_entropy [nats]", "mutual_information [nats]",
                     "twice_entropy [nats]", "capacity [nats]"], rows)

    points = truncation_curve(sigma, bond_dims, lattice)
    for point in points:
        ledger.record_flag("truncation_bound", point.within_bound, f"D={point.bond_dim}",
                           value=point.trace_distance - point.bound)
    write_csv_table(out_dir / "truncation.csv",
                    ["bond_dim", "trace_distance [trace norm]", "overlap", "vector_error [2-norm]",
                     "bound [trace norm]"],
                    [(p.bond_dim, p.trace_distance, p.overlap, p.vector_error, p.bound) for p in points])
    return _finish(out_dir, "entanglement", ledger, {'purification': tol}, {'bond_dims': bond_dims})


def cmd_knabe(args, config) -> int:
    settings = config['knabe']
    beta = args.beta if args.beta is not None else settings['beta']
    n = args.n if args.n is not None else settings['n']
    instances = args.instances if args.instances is not None else settings['instances']
    seed = args.seed if args.seed is not None else settings['seed']
    u_values = [float(u) for u in settings['u_values']]
    out_dir = _out_dir(args, config, "knabe")

    table = knabe_table(beta, u_values, n, instances, seed)
    rows = [row.as_row() for row in table.rows]
    header = list(rows[0])
    write_csv_table(out_dir / "knabe_table.csv", header,
                    [[row.get(column, "") for column in header] for row in rows])

    ledger = CheckLedger(f"knabe β={beta:g}")
    certificates = []
    for u in u_values:
        reference = ClassicalModelParams.uniform(n, 1.0, 0.0, u, beta)
        closed = min(classical_pair_gap(reference, k) for k in range(n))
        ledger.record("closed_form_pair_gap", abs(closed - table.row("const eps=1").gamma_loc[u_values.index(u)]),
                      1e-8, f"u={u:g}")
        for sites in settings['certify_sites']:
            certificate = certify_classical(ClassicalModelParams.uniform(sites, 1.0, 0.0, u, beta))
            ledger.merge(certificate.ledger)
            certificates.append((sites, u, certificate.gamma_loc, certificate.bound, certificate.g_min,
                                 certificate.projector_gap, certificate.hamiltonian_gap))
    write_csv_table(out_dir / "knabe_certificates.csv",
                    ["n", "u", "gamma_loc [gap]", "knabe_bound [gap]", "g_min [eigenvalue]",
                     "projector_gap [eigenvalue]", "hamiltonian_gap [eigenvalue]"], certificates)
    return _finish(out_dir, "knabe", ledger, {'closed_form_pair_gap': 1e-8},
                   {'beta': beta, 'n': n, 'instances': instances, 'rows': rows})


def cmd_models(args, config) -> int:
    out_dir = _out_dir(args, config, "models")
    ledger = CheckLedger("models")
    for name, document in example_documents().items():
        path = dump_document(document, out_dir / f"{name}.yaml")
        parsed = load_document(path)
        ledger.record_flag("parses", True, name, detail=f"{len(parsed.spec.jumps)} jumps")
    return _finish(out_dir, "models", ledger, {})


def cmd_decay(args, config) -> int:
    settings = config['decay']
    n = args.n if args.n is not None else settings['n']
    gamma_in = _floats(args.gamma_in) if args.gamma_in else settings['gamma_in']
    gamma_out = _floats(args.gamma_out) if args.gamma_out else settings['gamma_out']
    out_dir = _out_dir(args, config, "decay")

    params = FermionParams(n, tuple(gamma_in), tuple(gamma_out))
    report = fermionic_super_h_coeffs(params, settings.get('fit_max'))
    profile = report.profile
    ledger = CheckLedger(f"decay n={n}")
    ledger.record_flag("locality_bound", profile.bound_holds, "sqrt(γin γout)")
    if report.bound_applicable:
        ledger.record_flag("hopping_bound", report.bound_holds, "sqrt(γin γout)", value=report.worst_ratio)
    hopping_bound = report.bound[0, :profile.distances.size] if report.bound is not None else None
    _write_profile(out_dir / "decay_profile.csv", profile, hopping_bound)
    print(f"Preferred fit: {profile.preferred_fit} (exp R²={profile.exponential_r2:.4f}, "
          f"power R²={profile.polynomial_r2:.4f})")
    return _finish(out_dir, "decay", ledger, {},
                   {'rate': profile.rate, 'exponential_r2': profile.exponential_r2,
                    'polynomial_exponent': profile.polynomial_exponent, 'polynomial_r2': profile.polynomial_r2,
                    'preferred_fit': profile.preferred_fit, 'gamma_in': gamma_in, 'gamma_out': gamma_out,
                    'decay_constants': {'J': profile.coupling, 'c1': profile.c1, 'c2': profile.c2}})


COMMANDS = {
    'check-qdb': (cmd_check_qdb, "QDB residuals of a model against its reference state"),
    'map': (cmd_map, "Build and verify the super-Hamiltonian along one route"),
    'spectrum': (cmd_spectrum, "Lindbladian spectrum, gap and structural validation"),
    'steady-state': (cmd_steady_state, "Kernel of the Lindbladian as a density matrix"),
    'evolve': (cmd_evolve, "Time evolution from an initial state"),
    'entanglement': (cmd_entanglement, "Operator-space entanglement and MPS truncation of sqrt(sigma)"),
    'knabe': (cmd_knabe, "Local-gap table and ring certificates for the classical model"),
    'models': (cmd_models, "Write ready-to-run model documents"),
    'decay': (cmd_decay, "Decay of the single-particle super-Hamiltonian hopping"),
}

SPEC_COMMANDS = {'check-qdb', 'map', 'spectrum', 'steady-state', 'evolve', 'entanglement'}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Lindbladian to super-Hamiltonian toolkit")
    parser.add_argument('--config', help='Path to settings.yaml (default: SUPERHAM_CONFIG_PATH or ./config)')
    parser.add_argument('-v', '--verbose', action='store_true', help='Log at DEBUG level')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument('--out-dir', help='Report directory (default: SUPERHAM_OUT_DIR or ./reports)')
        sub.add_argument('--seed', type=int, help='Random seed')
        sub.add_argument('--tol', type=float, help='Override the primary tolerance of the command')
        if name in SPEC_COMMANDS:
            sub.add_argument('--spec', required=True, help='Model document (YAML)')
            sub.add_argument('--sigma', help='Reference state: gibbs, gaussian, maximally_mixed, steady, '
                                             'diagonal, matrix or a .npy file')
            sub.add_argument('--s', help='Comma-separated s values in [0, 1]')
        if name == 'map':
            sub.add_argument('--route', choices=ROUTES + tuple(ROUTE_ALIASES), default='dense',
                             help='Mapping route: dense, jumps (alias thm31) or frame (alias thm32)')
        if name == 'evolve':
            sub.add_argument('--t', help='Comma-separated evolution times')
            sub.add_argument('--initial', help='Initial state: maximally_mixed, zero, random or a .npy file')
        if name == 'entanglement':
            sub.add_argument('--cuts', help='Comma-separated cut sizes (sites 0..c-1 against the rest)')
            sub.add_argument('--bond-dims', help='Comma-separated ascending MPS bond dimensions')
        if name == 'knabe':
            sub.add_argument('--beta', type=float, help='Inverse temperature (default: 1)')
            sub.add_argument('--n', type=int, help='Ring size for the table (even, at least 4)')
            sub.add_argument('--instances', type=int, help='Random-ε instances per u value')
        if name == 'decay':
            sub.add_argument('--n', type=int, help='Number of modes (default: 100)')
            sub.add_argument('--gamma-in', help='Absorption rates γ0,γ1')
            sub.add_argument('--gamma-out', help='Emission rates γ0,γ1')
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = load_config(args.config or get_config_path())
    settings = config['logging']
    setup_logging(settings.get('file'), 'DEBUG' if args.verbose else settings.get('level', 'INFO'))
    handler, _ = COMMANDS[args.command]

    try:
        return handler(args, config)
    except Exception as e:
        kind, code = classify_error(e)
        logging.error(f"❌ {args.command} failed ({kind.value}): {e}")
        print(f"Error: {e}", file=sys.stderr)
        return code


if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nInterrupted by user. Goodbye! 👋")
        sys.exit(130)
