"""End-to-end runs of the command-line entry point."""

import logging

import numpy as np
import pytest
import yaml

from lindblad_superham.core.models import ClassicalModelParams, FermionParams
from lindblad_superham.core.spec_io import (
    classical_document,
    dump_document,
    fermionic_document,
    thermal_qubits_document,
)
from lindblad_superham.core.utils import setup_logging
from lindblad_superham.main import DEFAULT_CONFIG, load_config, main


def summary(out_dir, command):
    with open(out_dir / command / "summary.yaml") as f:
        return yaml.safe_load(f)


@pytest.fixture
def thermal_spec(quiet_cli):
    return dump_document(thermal_qubits_document(), quiet_cli / "thermal.yaml")


@pytest.fixture
def classical_spec(quiet_cli):
    return dump_document(classical_document(ClassicalModelParams.uniform(3, u=1.0)), quiet_cli / "classical.yaml")


def test_models_writes_documents(quiet_cli):
    out = quiet_cli / "out"
    assert main(["models", "--out-dir", str(out)]) == 0
    for name in ("classical_uniform", "classical_alternating", "fermionic", "thermal_qubits"):
        assert (out / "models" / f"{name}.yaml").exists()


def test_check_qdb_passes_on_thermal_qubits(quiet_cli, thermal_spec):
    out = quiet_cli / "out"
    assert main(["check-qdb", "--spec", str(thermal_spec), "--out-dir", str(out)]) == 0
    report = summary(out, "check-qdb")
    assert report['status'] == 'PASS'
    assert report['results']['s_values'] == [0.0, 0.5, 1.0]
    assert (out / "check-qdb" / "qdb_residuals.csv").exists()


def test_check_qdb_fails_with_coherent_term(quiet_cli):
    data = thermal_qubits_document()
    data['hamiltonian'] = [{'op': 'X', 'sites': [0], 'coefficient': 0.7}]
    path = dump_document(data, quiet_cli / "coherent.yaml")
    out = quiet_cli / "out"
    assert main(["check-qdb", "--spec", str(path), "--out-dir", str(out)]) == 1
    assert summary(out, "check-qdb")['status'] == 'FAIL'


def test_bad_documents_exit_with_parse_code(quiet_cli):
    data = thermal_qubits_document()
    data['format'] = "lindblad-superham/v0"
    path = dump_document(data, quiet_cli / "old.yaml")
    assert main(["spectrum", "--spec", str(path), "--out-dir", str(quiet_cli)]) == 2
    assert main(["spectrum", "--spec", str(quiet_cli / "missing.yaml"), "--out-dir", str(quiet_cli)]) == 2


def test_map_frame_route_on_thermal_qubits(quiet_cli, thermal_spec):
    out = quiet_cli / "out"
    assert main(["map", "--spec", str(thermal_spec), "--route", "frame", "--out-dir", str(out)]) == 0
    report = summary(out, "map")
    names = {check['check'] for check in report['checks']}
    assert 'route_agreement' in names
    assert report['results']['route'] == 'frame'
    assert (out / "map" / "decay_profile.csv").exists()


def test_map_jump_route_on_classical_model(quiet_cli, classical_spec):
    out = quiet_cli / "out"
    assert main(["map", "--spec", str(classical_spec), "--route", "jumps", "--out-dir", str(out)]) == 0
    assert (out / "map" / "super_hamiltonian_spectrum.csv").exists()


def test_map_with_maximally_mixed_state_negates_generator(quiet_cli):
    path = dump_document(thermal_qubits_document(beta=0.0), quiet_cli / "flat.yaml")
    out = quiet_cli / "out"
    assert main(["map", "--spec", str(path), "--sigma", "maximally_mixed", "--out-dir", str(out)]) == 0
    assert summary(out, "map")['results']['equals_negated_generator'] is True


def test_spectrum_is_deterministic(quiet_cli, classical_spec):
    first, second = quiet_cli / "a", quiet_cli / "b"
    assert main(["spectrum", "--spec", str(classical_spec), "--out-dir", str(first)]) == 0
    assert main(["spectrum", "--spec", str(classical_spec), "--out-dir", str(second)]) == 0
    assert (first / "spectrum" / "spectrum.csv").read_text() == (second / "spectrum" / "spectrum.csv").read_text()


def test_spectrum_of_fermionic_model(quiet_cli):
    path = dump_document(fermionic_document(FermionParams(4)), quiet_cli / "fermions.yaml")
    out = quiet_cli / "out"
    assert main(["spectrum", "--spec", str(path), "--out-dir", str(out)]) == 0
    assert np.isclose(summary(out, "spectrum")['results']['gap'], 1.0, atol=1e-8)


def test_knabe_with_config_file(quiet_cli):
    config = quiet_cli / "settings.yaml"
    config.write_text(yaml.safe_dump({'knabe': {'certify_sites': [4]}}))
    assert load_config(config)['knabe']['instances'] == DEFAULT_CONFIG['knabe']['instances']
    out = quiet_cli / "out"
    assert main(["--config", str(config), "knabe", "--instances", "3", "--out-dir", str(out)]) == 0
    report = summary(out, "knabe")
    assert report['results']['instances'] == 3
    assert (out / "knabe" / "knabe_table.csv").exists()
    assert len((out / "knabe" / "knabe_certificates.csv").read_text().splitlines()) == 4


def test_decay_command(quiet_cli):
    out = quiet_cli / "out"
    assert main(["decay", "--n", "40", "--out-dir", str(out)]) == 0
    assert summary(out, "decay")['results']['rate'] > 0


def test_entanglement_command(quiet_cli, classical_spec):
    out = quiet_cli / "out"
    assert main(["entanglement", "--spec", str(classical_spec), "--bond-dims", "1,4,16",
                 "--out-dir", str(out)]) == 0
    lines = (out / "entanglement" / "entanglement.csv").read_text().splitlines()
    assert len(lines) == 3


def test_evolve_command(quiet_cli, thermal_spec):
    out = quiet_cli / "out"
    assert main(["evolve", "--spec", str(thermal_spec), "--t", "0,1,5", "--initial", "zero",
                 "--out-dir", str(out)]) == 0
    assert len((out / "evolve" / "evolution.csv").read_text().splitlines()) == 4


def test_steady_state_command(quiet_cli, thermal_spec):
    out = quiet_cli / "out"
    assert main(["steady-state", "--spec", str(thermal_spec), "--out-dir", str(out)]) == 0
    report = summary(out, "steady-state")
    assert report['results']['kernel_dim'] == 1
    assert report['results']['trace_distance_to_sigma'] <= 1e-8


def test_map_accepts_published_route_tags(quiet_cli, classical_spec, thermal_spec):
    out = quiet_cli / "out"
    assert main(["map", "--spec", str(classical_spec), "--route", "thm31", "--out-dir", str(out)]) == 0
    results = summary(out, "map")['results']
    assert results['route'] == 'jumps'
    assert results['route_requested'] == 'thm31'

    assert main(["map", "--spec", str(thermal_spec), "--route", "thm32", "--out-dir", str(out)]) == 0
    results = summary(out, "map")['results']
    assert results['route'] == 'frame'
    assert set(results['decay_constants']) == {'J', 'c1', 'c2'}


def test_logging_level_from_config_and_verbose_flag(quiet_cli, thermal_spec):
    config = quiet_cli / "settings.yaml"
    config.write_text(yaml.safe_dump({'logging': {'level': 'WARNING'}}))
    out = quiet_cli / "out"
    assert main(["--config", str(config), "spectrum", "--spec", str(thermal_spec), "--out-dir", str(out)]) == 0
    assert logging.getLogger().level == logging.WARNING
    assert main(["--config", str(config), "-v", "spectrum", "--spec", str(thermal_spec),
                 "--out-dir", str(out)]) == 0
    assert logging.getLogger().level == logging.DEBUG


def test_setup_logging_targets(quiet_cli, monkeypatch):
    log_file = quiet_cli / "logs" / "run.log"
    assert setup_logging(log_file) == "stderr"

    monkeypatch.delenv("SUPERHAM_LOG_FILE")
    assert setup_logging(log_file, "info") == str(log_file)
    logging.info("mapping started")
    assert "mapping started" in log_file.read_text()

    with pytest.raises(ValueError):
        setup_logging(log_file, "chatty")
