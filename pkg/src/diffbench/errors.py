"""Exception hierarchy shared across the package."""


class DiffBenchError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(DiffBenchError):
    pass


class NonSymmetric(DiffBenchError):
    pass


class NoConvergence(DiffBenchError):
    pass


class NotPSD(DiffBenchError):
    pass


class TooFewSamples(DiffBenchError):
    pass


class KernelTooLarge(DiffBenchError):
    pass


class BadDetailLevel(DiffBenchError):
    pass


class BadRange(DiffBenchError):
    pass


class StepOutOfRange(DiffBenchError):
    pass


class NonZeroFinalNoise(DiffBenchError):
    pass


class BadSubsequence(DiffBenchError):
    pass


class SingularSystem(DiffBenchError):
    pass


class DimMismatch(DiffBenchError):
    pass


class DimensionCap(DiffBenchError):
    pass


class EmptyDataset(DiffBenchError):
    pass


class BadMagic(DiffBenchError):
    pass


class TruncatedFile(DiffBenchError):
    pass


class DimOverflow(DiffBenchError):
    pass


class UnsupportedFormat(DiffBenchError):
    pass


class DomainMismatch(DiffBenchError):
    pass


class BadSide(DiffBenchError):
    pass


class ConfigError(DiffBenchError):
    pass


class InsufficientSeries(DiffBenchError):
    pass


class IoError(DiffBenchError):
    pass
