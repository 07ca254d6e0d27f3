"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
StageError -> 4.
"""


class FlagcrashError(Exception):
    """Base class for all package errors."""


class ConfigError(FlagcrashError):
    """Invalid configuration: bad flag values, malformed config file,
    missing referenced files."""


class DataError(FlagcrashError):
    """Invalid input data: malformed CSV, violated invariants, empty
    results after filtering."""


class StageError(FlagcrashError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
