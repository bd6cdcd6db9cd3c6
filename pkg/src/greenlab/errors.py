"""Exception hierarchy shared by all greenlab modules."""


class GreenlabError(Exception):
    """Base class for every error raised by greenlab."""


# numerics
class NonConvergence(GreenlabError):
    pass


class NonFinite(GreenlabError):
    pass


class DivergentTail(GreenlabError):
    pass


class StepUnderflow(GreenlabError):
    pass


class NoSignChange(GreenlabError):
    pass


# manifold
class BadDimension(GreenlabError, ValueError):
    pass


class NonPositiveSlope(GreenlabError, ValueError):
    pass


class ParabolicRange(GreenlabError, ValueError):
    pass


class NotSublinear(GreenlabError, ValueError):
    pass


class InvalidManifold(GreenlabError, ValueError):
    pass


# green / level / flow
class Parabolic(GreenlabError):
    pass


class DegenerateF(GreenlabError):
    pass


class OutOfRange(GreenlabError, ValueError):
    pass


class DivergentAtPole(GreenlabError, ValueError):
    pass


class InadmissibleParams(GreenlabError, ValueError):
    pass


class AssumptionFails(GreenlabError):
    pass


class WeightRatioViolated(GreenlabError):
    def __init__(self, message, witness_t=None):
        super().__init__(message)
        self.witness_t = witness_t


class TailDivergence(GreenlabError):
    pass


class HypothesisNotMet(GreenlabError):
    pass


class CurvatureAuditError(GreenlabError):
    pass


# configuration
class ConfigError(GreenlabError):
    """Any configuration problem; maps to exit status 2."""


class ParseError(ConfigError):
    pass


class UnknownCheck(ConfigError):
    pass


class BadGrid(ConfigError):
    pass
