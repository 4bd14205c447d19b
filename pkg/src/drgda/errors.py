"""Exception hierarchy shared by all modules."""


class DRGDAError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(DRGDAError, ValueError):
    pass


class SingularityError(DRGDAError, ArithmeticError):
    """A polar factor was requested for a (numerically) rank-deficient matrix."""


class ManifoldError(DRGDAError, ValueError):
    """A matrix is too far from St(d, r) to be repaired."""


class TopologyError(DRGDAError, ValueError):
    pass


class SpectralError(DRGDAError, ValueError):
    pass


class NumericError(DRGDAError, ArithmeticError):
    """Non-finite values or divergence during a run."""


class OracleError(DRGDAError, RuntimeError):
    pass


class PartitionError(DRGDAError, ValueError):
    pass


class DataError(DRGDAError, ValueError):
    pass


class ConfigError(DRGDAError, ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        self.message = message
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
