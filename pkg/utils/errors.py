class CMCError(Exception):
    pass


class ArgumentError(CMCError):
    pass


class DataError(CMCError):
    pass


class NumericalError(CMCError):
    pass


class ConfigError(ArgumentError):
    pass


class AllWeightsZero(NumericalError):
    def __init__(self, n: int) -> None:
        super().__init__(f'All {n} weights are zero.')
        self.n = n


class DimensionMismatch(DataError):
    def __init__(self, expected: int, got: int) -> None:
        super().__init__(f'Expected dimension {expected}, got {got}.')
        self.expected = expected
        self.got = got


class ModelDimensionMismatch(DimensionMismatch):
    pass


class ParseError(DataError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f'Line {line}: {reason}')
        self.line = line
        self.reason = reason


class ProvenanceMismatch(CMCError):
    def __init__(self, provenance: str) -> None:
        super().__init__(f'Operation not defined for {provenance} summaries.')
        self.provenance = provenance


class CovarianceNotSPD(NumericalError):
    def __init__(self, region: int) -> None:
        super().__init__(f'Covariance of region {region} is not positive definite.')
        self.region = region


class DivisibilityViolation(ArgumentError):
    def __init__(self, n: int, m: int) -> None:
        super().__init__(f'N = {n} is not a multiple of M = {m}.')
        self.n = n
        self.m = m


class UnknownTarget(ArgumentError):
    def __init__(self, name: str) -> None:
        super().__init__(f'Unknown target: {name}.')
        self.name = name


class MomentOrderError(ArgumentError):
    def __init__(self, k: int) -> None:
        super().__init__(f'Moment order must be between 1 and 5, got {k}.')
        self.k = k


class EccentricityOutOfRange(NumericalError):
    def __init__(self, value: float) -> None:
        super().__init__(f'Eccentricity {value} outside [0, 1].')
        self.value = value


class NonpositivePeriod(NumericalError):
    pass


class ConstraintViolation(NumericalError):
    pass


class DegenerateRangeWarning(UserWarning):
    pass
