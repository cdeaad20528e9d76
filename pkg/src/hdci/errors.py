"""Exception hierarchy.

Everything raised on purpose by the package derives from ``HdciError`` so the
simulation harness can tell a solver failure apart from a programming error.
"""


class HdciError(Exception):
    pass


class ConfigError(HdciError, ValueError):
    """Invalid user input or configuration."""


class NonSymmetricOmega(ConfigError):
    pass


class MiddleRegimeLoading(ConfigError):
    pass


class NotSPD(ConfigError):
    pass


class NotPSD(ConfigError):
    pass


class OutOfRange(ConfigError):
    pass


class ZeroColumn(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class BadEigenOrder(ConfigError):
    pass


class ZeroKappa(ConfigError):
    pass


class OracleTooLarge(ConfigError):
    pass


class DegenerateSplit(ConfigError):
    pass


class SolverError(HdciError):
    """A numerical routine failed to deliver a certified answer."""


class DegenerateResponse(SolverError):
    pass


class MaxIterations(SolverError):
    pass


class InfeasibleScoreQP(SolverError):
    pass


class DivergentChiSq(SolverError):
    pass


class GapDiverges(SolverError):
    pass
