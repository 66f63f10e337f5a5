"""Exception hierarchy.

Two families: bad input (CLI exit code 2) and numerical failure (exit code 3).
"""


class WealthmapError(Exception):
    exit_code = 1


class InputError(WealthmapError, ValueError):
    exit_code = 2


class NumericalError(WealthmapError, ArithmeticError):
    exit_code = 3


class InvalidCoordinate(InputError):
    pass


class DuplicateId(InputError):
    pass


class NegativeRadius(InputError):
    pass


class EmptyZone(InputError):
    pass


class MalformedHeader(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class MalformedRecord(InputError):
    pass


class UnknownCluster(InputError):
    pass


class AllMissingColumn(InputError):
    pass


class EmptyCluster(InputError):
    pass


class TooFewRows(InputError):
    pass


class TooManyFeatures(InputError):
    pass


class MissingCover(InputError):
    pass


class ModelNotTree(InputError):
    pass


class ConfigError(InputError):
    pass


class DegenerateInput(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class ZeroVarianceTarget(NumericalError):
    pass
