"""Exception hierarchy. Validation problems map to CLI exit code 2, numerical ones to 3."""


class ConfigError(ValueError):
    """Invalid configuration or inconsistent inputs."""


class NumericalError(RuntimeError):
    """Base class for failures during a computation."""


class DomainError(NumericalError, ValueError):
    """State outside the validity domain of the equation of state."""


class StabilityError(NumericalError, ValueError):
    """Thermodynamic stability (p_rho > 0, e_theta > 0) violated."""


class SolverError(NumericalError):
    """Iterative linear solver hit its iteration cap."""


class CFLError(NumericalError, ValueError):
    """Time step violates a stability restriction."""


class PositivityError(NumericalError):
    """Density or temperature lost positivity during time stepping."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ScalingError(NumericalError, ValueError):
    """Scaling parameter too large for the prescribed data."""
