"""Exception hierarchy shared by every module in the package."""


class AccDNGDError(Exception):
    """Base class for all package errors."""


class InvalidParam(AccDNGDError, ValueError):
    pass


class NotConnected(AccDNGDError):
    pass


class NotDoublyStochastic(AccDNGDError, ValueError):
    pass


class SingularSystem(AccDNGDError):
    pass


class DegenerateLabels(AccDNGDError):
    pass


class NonFinite(AccDNGDError, FloatingPointError):
    """Raised when an iterate or an objective evaluation stops being finite."""


class NoConvergence(AccDNGDError):
    pass


class NotStronglyConvex(AccDNGDError, ValueError):
    pass


class StepTooLarge(AccDNGDError, ValueError):
    pass


class NonPositiveError(AccDNGDError, ValueError):
    """A rate fit met an error value that is not strictly positive."""


class ParseError(AccDNGDError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(AccDNGDError, ValueError):
    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
