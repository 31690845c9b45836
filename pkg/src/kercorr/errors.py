"""Exception hierarchy shared across the package.

Each class carries the process exit code the CLI maps it to.
"""


class KercorrError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(KercorrError):
    """Invalid argument, malformed input file, or dimension mismatch."""

    exit_code = 2


class DegenerateVarianceError(KercorrError):
    """A kernel variance is zero (or estimated nonpositive), so no
    correlation is defined."""

    exit_code = 3


class InfeasibleError(KercorrError):
    """A calibration target cannot be met with valid parameters."""

    exit_code = 3


class CapacityError(KercorrError):
    """An exact enumeration would exceed the supported problem size."""

    exit_code = 4


class InternalError(KercorrError):
    """State invariants were violated; indicates a bug, not bad input."""

    exit_code = 1
