"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class ExplainRulError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ExplainRulError, ValueError):
    """Invalid configuration or parameter set."""


class ParseError(ExplainRulError, ValueError):
    """Malformed input file; carries the file and 1-based line number."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class StructuralError(ExplainRulError, ValueError):
    """Shapes or counts that do not fit together."""


class NoDataError(ExplainRulError):
    """A directory or dataset that holds nothing to work on."""


class SizeError(StructuralError):
    """Vector length outside what an operation accepts."""


class RangeError(ExplainRulError, ValueError):
    """Frequency or index range incompatible with the data."""


class InsufficientDataError(ExplainRulError, ValueError):
    """Too few samples to fit the requested statistic."""


class DivergenceError(ExplainRulError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str = "non-finite loss"):
        self.epoch = epoch
        super().__init__(f"{message} at epoch {epoch}")


class DegenerateLabelError(ExplainRulError, ValueError):
    """RUL labels cannot be normalized (maximum RUL would be zero)."""


class UndefinedMetricError(ExplainRulError, ValueError):
    """Metric undefined at the requested evaluation instant."""


class RankError(ExplainRulError, ValueError):
    """Not enough samples to determine every unknown."""


class DependencyError(ExplainRulError):
    """A pipeline stage was requested before its upstream stage ran."""

    def __init__(self, stage: str, missing: str):
        self.stage = stage
        self.missing = missing
        super().__init__(f"stage '{stage}' needs the output of '{missing}'; run '{missing}' first")


class ModelFileError(ExplainRulError):
    """Base class for model (de)serialization failures."""


class ModelVersionError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


class TruncatedFileError(ModelFileError):
    pass


class KindMismatchError(ModelFileError):
    pass
