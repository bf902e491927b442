import csv
import logging
import os
import sys
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
import yaml


LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
STREAM_TARGETS = ('stdout', 'stderr')


def setup_logging(log_file=None, level="INFO") -> str:
    """
    Point root logging at the configured target and level.

    SUPERHAM_LOG_FILE overrides `log_file` (the `logging.file` setting); with
    neither, logs go to the data directory. 'stdout' and 'stderr' log only to
    that stream, a file target also echoes to the console.

    Returns:
        The resolved log target
    """
    from lindblad_superham.core.paths import get_log_path

    target = str(log_file) if log_file and not os.getenv("SUPERHAM_LOG_FILE") else str(get_log_path())
    numeric_level = logging.getLevelName(str(level).upper())
    if not isinstance(numeric_level, int):
        raise ValueError(f"Unknown log level '{level}'")

    stream = getattr(sys, target.lower()) if target.lower() in STREAM_TARGETS else None
    if stream is not None:
        handlers = [logging.StreamHandler(stream)]
    else:
        handlers = [logging.StreamHandler()]
        try:
            Path(target).parent.mkdir(parents=True, exist_ok=True)
            handlers.insert(0, logging.FileHandler(target))
        except OSError as e:
            print(f"Warning: Could not open log file {target}: {e}", file=sys.stderr)

    logging.basicConfig(level=numeric_level, format=LOG_FORMAT, handlers=handlers, force=True)
    logging.debug(f"📝 Logging to {target} at {logging.getLevelName(numeric_level)}")
    return target


def format_number(value) -> str:
    """Fixed-width scientific formatting so report bodies are byte-stable."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return "nan"
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.12e}"
    return str(value)


def complex_columns(name: str, unit: str) -> List[str]:
    """Header pair for a complex quantity stored as real and imaginary columns."""
    return [f"{name}_re [{unit}]", f"{name}_im [{unit}]"]


def write_csv_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV table; numeric cells go through format_number."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_number(cell) for cell in row])
    logging.info(f"📄 Wrote {path}")
    return path


def write_matrix_csv(path, matrix: np.ndarray, unit: str = "amplitude") -> Path:
    """Dense matrix as (row, col, re, im) records."""
    matrix = np.asarray(matrix)
    rows = [(i, j, float(matrix[i, j].real), float(matrix[i, j].imag))
            for i in range(matrix.shape[0]) for j in range(matrix.shape[1])]
    return write_csv_table(path, ["row", "col"] + complex_columns("entry", unit), rows)


def _plain(value):
    """Convert numpy scalars/arrays into YAML-safe builtins."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(np.real(value)), 'im': float(np.imag(value))}
    return value


def write_summary(path, command: str, ledger, tolerances: dict, extra: dict = None) -> Path:
    """
    Write the summary block of a report: pass flag, tolerances and every check.

    Args:
        path: Target YAML file
        command: CLI command that produced the report
        ledger: CheckLedger holding the checks
        tolerances: Tolerances in effect for the run
        extra: Additional scalar results to echo
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        'command': command,
        'status': 'PASS' if ledger.passed else 'FAIL',
        'tolerances': _plain(tolerances),
        'stats': _plain(ledger.get_stats_summary()),
        'checks': _plain(ledger.as_rows()),
    }
    if extra:
        document['results'] = _plain(extra)
    with open(path, 'w') as f:
        yaml.safe_dump(document, f, sort_keys=False)
    logging.info(f"📄 Wrote {path}")
    return path
