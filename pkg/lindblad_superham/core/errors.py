import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple


class FailureKind(Enum):
    """Classification of pipeline failures"""
    # Exit code 1
    NUMERIC = "numeric_fail"              # Check exceeded tolerance, solver failure
    PRECONDITION = "precondition"         # Route or model hypothesis violated

    # Exit code 2
    PARSE = "parse_fail"                  # Malformed model document
    IO = "io_fail"                        # Unreadable/unwritable file

    UNKNOWN = "unknown"                   # Unclassified error


EXIT_CODES = {
    FailureKind.NUMERIC: 1,
    FailureKind.PRECONDITION: 1,
    FailureKind.PARSE: 2,
    FailureKind.IO: 2,
    FailureKind.UNKNOWN: 1,
}


class SuperHamError(Exception):
    """Base class for every error raised by the toolkit."""
    kind = FailureKind.UNKNOWN


class DimensionError(SuperHamError, ValueError):
    """Shape mismatch or a configured size cap exceeded."""
    kind = FailureKind.PRECONDITION


class SingularStateError(SuperHamError, ValueError):
    """A reference state that must be invertible is not."""
    kind = FailureKind.PRECONDITION


class SpectrumError(SuperHamError, ArithmeticError):
    kind = FailureKind.NUMERIC


class SteadyStateError(SuperHamError, ArithmeticError):
    kind = FailureKind.NUMERIC


class NotQDBError(SuperHamError, ValueError):
    kind = FailureKind.PRECONDITION


class MappingPreconditionError(SuperHamError, ValueError):
    """A super-Hamiltonian route was called outside its hypotheses."""
    kind = FailureKind.PRECONDITION


class ReconstructionError(SuperHamError, ArithmeticError):
    """Coefficient extraction could not reproduce the superoperator."""
    kind = FailureKind.NUMERIC


class ApproximationError(SuperHamError, ArithmeticError):
    """A polynomial approximation missed its proven error bound."""
    kind = FailureKind.NUMERIC


class SpecFormatError(SuperHamError, ValueError):
    kind = FailureKind.PARSE


def classify_error(exception) -> Tuple[FailureKind, int]:
    """
    Classify an exception and pick the process exit code.

    Args:
        exception: The exception that occurred

    Returns:
        Tuple of (failure_kind, exit_code)
    """
    if isinstance(exception, SuperHamError):
        kind = exception.kind
    elif isinstance(exception, (OSError, UnicodeDecodeError)):
        kind = FailureKind.IO
    elif type(exception).__module__.startswith('yaml'):
        kind = FailureKind.PARSE
    elif isinstance(exception, (ValueError, ArithmeticError)):
        kind = FailureKind.NUMERIC
    else:
        kind = FailureKind.UNKNOWN
    return kind, EXIT_CODES[kind]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: Optional[float]
    passed: bool
    subject: str = ""
    detail: str = ""

    def as_row(self) -> dict:
        return {
            'check': self.name,
            'subject': self.subject,
            'value': self.value,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'detail': self.detail,
        }


class CheckLedger:
    """
    Collects named numerical checks with the tolerance each was held to.

    Every report-only operation returns one of these, so callers can both
    inspect individual values and print a pass/fail summary.
    """

    def __init__(self, title: str = "checks"):
        self.title = title
        self.results: List[CheckResult] = []

        # Statistics for reporting
        self.stats = {
            'total_checks': 0,
            'passed_checks': 0,
            'failed_checks': 0,
            'failures_by_check': {}
        }

    def _store(self, result: CheckResult) -> bool:
        self.results.append(result)
        self.stats['total_checks'] += 1
        if result.passed:
            self.stats['passed_checks'] += 1
        else:
            self.stats['failed_checks'] += 1
            self.stats['failures_by_check'][result.name] = self.stats['failures_by_check'].get(result.name, 0) + 1
            logging.warning(f"❌ Check '{result.name}' failed for {result.subject or self.title}: "
                            f"value={result.value:.3e} tolerance={result.tolerance}")
        return result.passed

    def record(self, name: str, value: float, tolerance: float, subject: str = "",
               upper: bool = True, detail: str = "") -> bool:
        """
        Record a check of the form value <= tolerance (or >= when upper is False).

        Returns:
            True if the check passed
        """
        value = float(value)
        passed = value <= tolerance if upper else value >= tolerance
        return self._store(CheckResult(name, value, float(tolerance), bool(passed), subject, detail))

    def record_flag(self, name: str, passed: bool, subject: str = "", detail: str = "",
                    value: float = float('nan')) -> bool:
        """Record a boolean check without a tolerance."""
        return self._store(CheckResult(name, float(value), None, bool(passed), subject, detail))

    def merge(self, other: "CheckLedger") -> "CheckLedger":
        for result in other.results:
            self._store(result)
        return self

    @property
    def passed(self) -> bool:
        return self.stats['failed_checks'] == 0

    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def value(self, name: str, subject: str = "") -> float:
        """Value of the first check with this name (and subject, if given)."""
        for result in self.results:
            if result.name == name and (not subject or result.subject == subject):
                return result.value
        raise KeyError(name)

    def as_rows(self) -> List[dict]:
        return [r.as_row() for r in self.results]

    def get_stats_summary(self) -> dict:
        """Get summary statistics for reporting"""
        total = self.stats['total_checks']
        passed = self.stats['passed_checks']
        return {
            'title': self.title,
            'total_checks': total,
            'passed_checks': passed,
            'failed_checks': self.stats['failed_checks'],
            'pass_rate': (passed / total * 100) if total > 0 else 0,
            'failures_by_check': dict(self.stats['failures_by_check']),
            'status': 'PASS' if self.passed else 'FAIL',
        }

    def format_stats_summary(self) -> str:
        """Format statistics as a human-readable string"""
        stats = self.get_stats_summary()

        if stats['total_checks'] == 0:
            return f"{self.title}: no checks recorded"

        lines = []
        if stats['status'] == 'PASS':
            lines.append(f"✅ {self.title}: {stats['passed_checks']}/{stats['total_checks']} checks passed")
        else:
            lines.append(f"⚠️  {self.title}: {stats['failed_checks']} of {stats['total_checks']} checks failed "
                         f"({stats['pass_rate']:.1f}% pass rate)")
            details = ", ".join([f"{k}: {v}" for k, v in stats['failures_by_check'].items()])
            lines.append(f"   Failure breakdown: {details}")

        return "\n".join(lines)
