"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ProvGuardError(Exception):
    exit_code = 2


class ConfigError(ProvGuardError, ValueError):
    """Invalid configuration, descriptor or command-line usage."""

    exit_code = 1


class DataError(ProvGuardError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class GraphError(DataError):
    pass


class NumericalError(ProvGuardError, ArithmeticError):
    """Training or scoring produced a non-finite value."""

    exit_code = 3
