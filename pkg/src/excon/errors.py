"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the command layer can
translate failures without a lookup table.
"""


class ExconError(Exception):
    exit_code = 1


class ConfigError(ExconError, ValueError):
    exit_code = 2


class DataError(ExconError, ValueError):
    exit_code = 3


class InvalidInputError(DataError):
    pass


class UnimputableError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class ShapeMismatchError(DataError):
    pass


class LabelingError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class NumericError(ExconError, ArithmeticError):
    exit_code = 4


class TrainingError(NumericError):
    pass
