"""Exception types raised by the solvers and model builders."""


class MMDPError(Exception):
    """Base class for all package errors."""


class ValidationError(MMDPError, ValueError):
    pass


class NonStochasticRow(ValidationError):
    def __init__(self, state, action, row_sum):
        self.state, self.action, self.row_sum = state, action, row_sum
        super().__init__(
            f"kernel row (state={state}, action={action}) sums to {row_sum!r}, not 1"
        )


class NegativeProbability(ValidationError):
    pass


class NonFiniteReward(ValidationError):
    pass


class NotSquare(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NotADistribution(ValidationError):
    pass


class ComponentOutOfRange(ValidationError):
    pass


class ZeroProbabilityConditioning(ValidationError):
    pass


class ConfigError(ValidationError):
    """Invalid scenario or run configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SolverError(MMDPError, RuntimeError):
    pass


class NotErgodic(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, max_iter, residual=None):
        self.max_iter, self.residual = max_iter, residual
        super().__init__(
            f"no convergence after {max_iter} iterations (span residual {residual})"
        )


class SingularSystem(SolverError):
    pass


class IdentityCheckFailed(SolverError):
    def __init__(self, max_residual):
        self.max_residual = max_residual
        super().__init__(f"group-inverse identity residual {max_residual:.3e}")


class AllSampledPoliciesNonErgodic(SolverError):
    pass


class BudgetExceeded(SolverError):
    def __init__(self, needed, budget):
        self.needed, self.budget = needed, budget
        super().__init__(
            f"exhaustive enumeration needs {needed} contexts per group, budget is "
            f"{budget}; raise the budget or use sampled mode"
        )


class CapExceeded(SolverError):
    def __init__(self, count, cap):
        self.count, self.cap = count, cap
        super().__init__(f"{count} local policy tuples exceed the cap of {cap}")
