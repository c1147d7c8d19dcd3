"""Exception types shared across the package."""


class AbagBenchError(Exception):
    """Base class for all package errors."""


class ParseError(AbagBenchError):
    """Malformed input file (bad sequence character, bad header, bad CSV row)."""


class IntegrityError(AbagBenchError):
    """Cross-reference or coverage violation (dangling id, duplicate key, missing pair)."""


class DomainError(AbagBenchError):
    """A scalar value outside its documented assay range."""


class UndefinedMetricError(AbagBenchError):
    """Metric has no defined value for this input (single class, constant vector, ...)."""


class InfeasibleSplitError(AbagBenchError):
    """Fewer groups than folds under the requested split strategy."""


class ProtocolError(AbagBenchError):
    """An analysis was invoked on inputs its protocol forbids."""


class ConfigError(AbagBenchError):
    """Inconsistent or out-of-range configuration."""


class NumericFaultError(AbagBenchError):
    """Non-finite activation produced during a forward pass."""

    def __init__(self, message: str, layer_index: int | None = None):
        super().__init__(message)
        self.layer_index = layer_index
