"""Exception types shared across the package."""


class TargetOptError(Exception):
    """Base class for all errors raised by targetopt."""


class InsufficientData(TargetOptError):
    pass


class DegenerateColumn(TargetOptError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ZeroWeight(TargetOptError):
    """No residual covariance left between predictors and response."""


class AllWeightsDegenerate(TargetOptError):
    """Every regression weight hit the clamping floor."""


class SingularNormalEquations(TargetOptError):
    pass


class DegenerateToConstant(TargetOptError):
    pass


class IdenticallyZero(DegenerateToConstant):
    """The fitted polynomial vanishes everywhere."""


class EmptyInterval(TargetOptError):
    pass


class UnknownModelId(TargetOptError):
    pass


class LengthMismatch(TargetOptError):
    pass


class OracleFailure(TargetOptError):
    """Measurement source raised; ``trace`` holds everything evaluated so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StateCorrupt(TargetOptError):
    pass


class SchemaMismatch(TargetOptError):
    pass


class ConfigError(TargetOptError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
