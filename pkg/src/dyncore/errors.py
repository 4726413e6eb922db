"""Exception hierarchy shared by all dyncore modules."""


class DyncoreError(Exception):
    """Base class for every error raised by dyncore."""


class InputError(DyncoreError, ValueError):
    """Malformed argument: wrong dimension, coalition outside the grand coalition, bad weights."""


class ConfigurationError(DyncoreError):
    """Inconsistent configuration, e.g. a floor B too high for any allocation to exist."""


class SolverError(DyncoreError):
    """The LP solver failed (infeasible, unbounded or numerically stuck)."""


class InfeasibleError(SolverError):
    pass


class UnboundedError(SolverError):
    pass


class SimulationError(DyncoreError):
    """A schedule produced an allocation that violates the trajectory invariants."""

    def __init__(self, step: int, reason: str):
        super().__init__(f"step {step}: {reason}")
        self.step = step
        self.reason = reason


class PolicyError(SimulationError):
    """An allocation policy produced an infeasible allocation."""


class DivergenceError(DyncoreError):
    """Iterated worths left every finite bound."""


class PreconditionError(DyncoreError):
    """A structural hypothesis required by an operation does not hold."""


class SearchExhaustedError(DyncoreError):
    """A bounded search ran out of horizon without finding what it looked for."""


class BudgetError(DyncoreError):
    """A combinatorial search exceeded its node budget."""

    def __init__(self, message: str, explored: int = 0):
        super().__init__(message)
        self.explored = explored
