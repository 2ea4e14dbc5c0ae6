"""Exception hierarchy.

The three top-level families map onto the CLI exit codes: configuration
problems exit with 2, bad input data with 3 and numerical failures with 4.
"""


class HydrocalError(Exception):
    exit_code = 1


class ConfigError(HydrocalError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ValidationError(ConfigError):
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DataError(HydrocalError):
    exit_code = 3


class InvalidCode(DataError):
    pass


class CycleDetected(DataError):
    pass


class InactiveOutlet(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class MissingForcing(DataError):
    pass


class LengthMismatch(DataError):
    pass


class NegativeFlow(DataError):
    pass


class EmptySeries(DataError):
    pass


class WindowOutOfRange(DataError):
    pass


class InsufficientHistory(DataError):
    pass


class BadSpec(DataError):
    pass


class BadN(DataError):
    pass


class EmptyFront(DataError):
    pass


class NoEvents(DataError):
    pass


class NumericalError(HydrocalError):
    exit_code = 4


class NonFiniteFlux(NumericalError):
    pass


class ConstantObs(NumericalError):
    pass


class DegenerateObs(NumericalError):
    pass


class ZeroRainfall(NumericalError):
    pass


class ZeroEventRainfall(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class ZeroObservedSignature(NumericalError):
    pass


class NonDifferentiableCost(NumericalError):
    pass
