"""Exception hierarchy shared by all modules."""


class ReconError(Exception):
    """Base class for every error raised by slrecon."""


class ParseError(ReconError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CloudFormatError(ParseError):
    """Inconsistent arity or unsupported layout in a point-cloud file."""


class EmptyCloudError(ReconError, ValueError):
    pass


class InsufficientDataError(ReconError, ValueError):
    pass


class ShapeSpecError(ReconError, ValueError):
    pass


class GridTooLargeError(ReconError):
    pass


class OutOfDomainError(ReconError, ValueError):
    pass


class EmptySeedError(ReconError, ValueError):
    pass


class InvalidEnergyError(ReconError, ValueError):
    pass


class NumericalFailure(ReconError, FloatingPointError):
    pass


class NoInterfaceError(ReconError):
    pass


class ConfigError(ReconError, ValueError):
    pass
