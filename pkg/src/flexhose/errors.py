"""Exception hierarchy shared across the package."""


class FlexhoseError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(FlexhoseError):
    """Invalid parameters, states, or configuration input."""


class NumericalError(FlexhoseError):
    """A numerical routine failed (singular solve, blow-up, non-convergence)."""


class DegenerateTensionError(NumericalError):
    """A tension vector passed through (or too close to) zero norm."""


class FlatnessSingularityError(NumericalError):
    """Flat-output expansion hit a singular configuration."""


class AttitudeRecoverySingularityError(NumericalError):
    """Quadrotor attitude cannot be recovered from the thrust vector and yaw."""


class DynamicsSolveError(NumericalError):
    """The equations-of-motion linear system is singular or ill-conditioned."""


class RiccatiBlowupError(NumericalError):
    """Backward Riccati integration escaped in finite time."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class ShootingError(NumericalError):
    """Static-shape shooting solve failed (unreachable target or no convergence)."""


class DivergenceError(NumericalError):
    """A simulation rollout diverged (state escaped the sanity bound)."""
