"""Error taxonomy shared by the CLI: maps to process exit codes."""


class CsisenseError(Exception):
    exit_code = 1


class UsageError(CsisenseError):
    """Bad arguments, malformed config, protocol mismatch."""

    exit_code = 2


class DataError(CsisenseError):
    """Missing or corrupt traces, manifests, or model bundles."""

    exit_code = 3


class NumericError(CsisenseError):
    """A numerical routine failed to produce finite results."""

    exit_code = 4
