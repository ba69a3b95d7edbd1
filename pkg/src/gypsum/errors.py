"""Exception types shared across the pipeline."""


class GypsumError(Exception):
    pass


class ParseError(GypsumError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")


class FormatError(GypsumError):
    pass


class LengthError(GypsumError):
    pass


class ShapeMismatch(GypsumError):
    pass


class MissingFile(GypsumError, FileNotFoundError):
    pass


class UnknownKind(GypsumError, KeyError):
    pass


class DegenerateMask(GypsumError):
    pass


class NonFinite(GypsumError, FloatingPointError):
    pass


class DataError(GypsumError):
    pass


class ConfigError(GypsumError):
    pass


class StageError(GypsumError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
