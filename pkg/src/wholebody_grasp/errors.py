"""Exceptions raised by the grasp simulator."""


class GraspSimError(Exception):
    """Base class for simulator errors."""


class ConfigurationError(GraspSimError, ValueError):
    """A parameter set violates an invariant (raised at construction time)."""


class OverCompressionError(GraspSimError):
    """A pressure chamber was squeezed past its physically plausible limit."""

    def __init__(self, displaced_volume: float, limit: float):
        super().__init__(
            f"displaced volume {displaced_volume:.3e} m^3 reaches the "
            f"over-compression limit {limit:.3e} m^3"
        )
        self.displaced_volume = displaced_volume
        self.limit = limit


class NonConvergenceError(GraspSimError):
    """Quasi-static relaxation ended with a residual wrench above tolerance."""

    def __init__(self, residual_force: float, residual_torque: float, iterations: int):
        super().__init__(
            f"equilibrium not reached after {iterations} iterations "
            f"(|F|={residual_force:.3e} N, |tau|={residual_torque:.3e} N*m)"
        )
        self.residual_force = residual_force
        self.residual_torque = residual_torque
        self.iterations = iterations


class SchemaMismatchError(GraspSimError):
    """Summary files handed to the report do not share one column schema."""
