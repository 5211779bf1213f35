"""Exception types shared across the package."""


class PrivchangeError(Exception):
    """Base class for all library errors."""


class ModelError(PrivchangeError):
    """Invalid model data, or a model-dependent precondition failed."""


class ShapeMismatch(ModelError):
    pass


class NonStochasticRow(ModelError):
    """A probability row does not sum to one within tolerance."""


class NegativeEntry(ModelError):
    pass


class NonPositiveEntry(ModelError):
    pass


class NotIrreducible(ModelError):
    """The closed-loop chain has more than one communicating class."""


class NotSchur(ModelError):
    pass


class NotSPD(ModelError):
    pass


class SingularProjection(ModelError):
    pass


class SingularL(ModelError):
    """I - A - BK is singular, so the stationary mean is undefined."""


class InfiniteCost(ModelError):
    """Every reachable support carries an infinite divergence cost."""


class LambdaNonpositive(PrivchangeError):
    """Closed forms divide by the trade-off weight, so it must be > 0."""


class SolverError(PrivchangeError):
    """An optimization backend failed."""


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    pass


class NotConverged(SolverError):
    pass


class ScenarioParseError(PrivchangeError):
    """A scenario file is malformed; the message carries site diagnostics."""


class IndexOutOfRange(PrivchangeError):
    pass
