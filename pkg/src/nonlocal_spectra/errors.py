"""Failure modes shared across the solver modules."""


class NonConvergenceError(RuntimeError):
    """Iteration budget exhausted; carries the last certified bracket."""

    def __init__(self, message, bracket=None, iterations=None):
        super().__init__(message)
        self.bracket = bracket
        self.iterations = iterations


class IrreducibilityError(RuntimeError):
    """Power iteration lost strict positivity; the matrix is reducible."""


class DegeneratePointError(ValueError):
    """Kernel evaluation requested at a point where the dispersal budget vanishes."""


class ResonanceError(RuntimeError):
    """The principal eigenvalue sits inside the resonance band around zero."""


class WitnessConstructionError(RuntimeError):
    """The cutoff needed for a maximum-principle violation witness is infeasible."""


class SubsolutionFailureError(RuntimeError):
    """No positive multiple of the perturbed eigenfunction is a subsolution."""


class MonotonicityError(RuntimeError):
    """Fixed-point iterates left the monotone corridor; the shift k is too small."""


class ResolventError(RuntimeError):
    """The shifted operator could not be inverted."""


class StabilityError(RuntimeError):
    """Time stepping produced states outside the admissible cone."""


class CriterionFailure(RuntimeError):
    """No bisection bracket exists: the mass functional stays below one."""

    def __init__(self, message, f_limit=None):
        super().__init__(message)
        self.f_limit = f_limit


class NumericalInconsistencyError(RuntimeError):
    """Two routes that must agree disagreed beyond slack."""


class ConfigError(ValueError):
    """Scenario file failed validation."""


class ScenarioError(RuntimeError):
    """A scenario run failed; the original error is chained with its context."""
