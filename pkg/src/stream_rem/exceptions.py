"""Exception hierarchy shared by all modules."""


class StreamError(Exception):
    """Base class for every error raised by the package."""


class DataError(StreamError):
    """Invalid or inconsistent input data (CLI exit code 1)."""


class NumericError(StreamError):
    """Numerical failure during fitting (CLI exit code 3)."""


class MissingAttribute(DataError):
    def __init__(self, node, line=None):
        self.node = node
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"event references unknown node {node!r}{where}")


class TimeViolation(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, path, line, reason):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class DuplicateDyad(DataError):
    pass


class UnknownNode(DataError, KeyError):
    def __str__(self):
        return f"unknown node {self.args[0]!r}"


class MissingEmbedding(DataError):
    pass


class EmptyClassSet(DataError):
    pass


class UnsortedQueries(DataError):
    pass


class EmptyRiskSet(DataError):
    pass


class InvalidDomain(StreamError, ValueError):
    pass


class InsufficientDf(StreamError, ValueError):
    pass


class DimensionMismatch(StreamError, ValueError):
    pass


class UnknownEffect(StreamError, KeyError):
    pass


class NonFiniteGradient(NumericError):
    pass


class Diverged(NumericError):
    pass


class NoData(DataError):
    pass


class SingularHessian(NumericError):
    pass


class AllCellsFailed(NumericError):
    pass


class InfeasibleConfig(StreamError, ValueError):
    pass


class ConfigMismatch(DataError):
    pass


class CacheVersionError(DataError):
    pass
