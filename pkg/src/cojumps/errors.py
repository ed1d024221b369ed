"""Exception hierarchy. The CLI maps each family to an exit code."""


class CojumpError(Exception):
    exit_code = 1


class ConfigError(CojumpError):
    exit_code = 2


class DataError(CojumpError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class GridError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class ModelError(CojumpError):
    exit_code = 4


class NonStationaryError(ModelError):
    pass


class RunawayError(ModelError):
    pass
