"""Tests for reading and writing model documents."""

import numpy as np
import pytest
import yaml

from lindblad_superham.core.errors import SpecFormatError
from lindblad_superham.core.lindblad import assemble
from lindblad_superham.core.models import ClassicalModelParams, build_classical
from lindblad_superham.core.operators import SIGMA_MINUS, SIGMA_PLUS
from lindblad_superham.core.qdb import qdb_residual
from lindblad_superham.core.spec_io import (
    FORMAT_TAG,
    dump_document,
    example_documents,
    generic_document,
    load_document,
    parse_complex,
    parse_document,
    thermal_qubits_document,
)


def test_parse_thermal_qubits():
    document = parse_document(thermal_qubits_document(n=2, beta=0.5))
    assert document.kind == 'generic'
    assert document.lattice.n == 2
    assert len(document.spec.jumps) == 4
    assert np.allclose(document.spec.jumps[0].matrix, SIGMA_MINUS)
    assert np.allclose(document.spec.jumps[1].matrix, SIGMA_PLUS)
    assert document.spec.jumps[0].partner == 1
    assert document.s_values == (0.0, 0.5, 1.0)
    sigma = document.resolve_sigma()
    assert np.isclose(np.trace(sigma).real, 1.0)
    assert qdb_residual(document.spec, sigma, 1.0).holds(1e-10)


def test_parse_classical_block():
    data = {'format': FORMAT_TAG, 'kind': 'classical', 'classical': {'n': 3, 'eps': [1.0, 0.5, 2.0], 'u': 1.0}}
    document = parse_document(data)
    assert document.classical.n == 3
    assert len(document.spec.jumps) == 18
    _, expected = build_classical(document.classical)
    assert np.allclose(document.resolve_sigma(), expected)
    assert np.allclose(document.resolve_sigma('maximally_mixed'), np.eye(8) / 8)


def test_parse_fermionic_block():
    data = {'format': FORMAT_TAG, 'kind': 'fermionic', 'fermionic': {'n': 3}}
    document = parse_document(data)
    assert document.fermionic.gamma_in == (3.0, 1.0)
    sigma = document.resolve_sigma()
    assert np.max(np.abs(assemble(document.spec).apply(sigma))) <= 1e-10


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d.update(format="something/v0"),
    lambda d: d['jumps'][0].update(op='sigma_z'),
    lambda d: d['jumps'][0].update(matrix=[[0, 1], [0, 0]]),
    lambda d: d['jumps'][0].update(sites=[0, 1]),
    lambda d: d['jumps'][0].update(partner=9),
    lambda d: d.update(s=[1.5]),
    lambda d: d.update(sigma={'type': 'thermal'}),
    lambda d: d.update(classical={'n': 3}),
])
def test_malformed_documents_are_rejected(mutate):
    data = thermal_qubits_document()
    mutate(data)
    with pytest.raises(SpecFormatError):
        parse_document(data)


def test_complex_entries():
    assert parse_complex("0.5+2j") == 0.5 + 2j
    assert parse_complex("1 - 1j") == 1 - 1j
    assert parse_complex({'re': 1.0, 'im': -0.5}) == 1 - 0.5j
    assert parse_complex(3) == 3
    with pytest.raises(SpecFormatError):
        parse_complex("one")
    with pytest.raises(SpecFormatError):
        parse_complex(True)


def test_invalid_yaml_is_a_format_error(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("format: [unclosed\n")
    with pytest.raises(SpecFormatError):
        load_document(path)


def test_example_documents_round_trip(tmp_path):
    for name, data in example_documents().items():
        path = dump_document(data, tmp_path / f"{name}.yaml")
        assert yaml.safe_load(path.read_text()) == data
        document = load_document(path)
        sigma = document.resolve_sigma()
        for s in document.s_values:
            assert qdb_residual(document.spec, sigma, s).holds(1e-9), (name, s)


def test_generic_document_reproduces_generator(tmp_path):
    spec, _ = build_classical(ClassicalModelParams.uniform(3, u=1.0))
    path = dump_document(generic_document(spec, sigma={'type': 'steady'}), tmp_path / "generic.yaml")
    document = load_document(path)
    assert document.kind == 'generic'
    assert [t.partner for t in document.spec.jumps] == [t.partner for t in spec.jumps]
    assert np.allclose(assemble(document.spec).matrix, assemble(spec).matrix)
