"""Exception types raised across the package."""


class AerialManipError(Exception):
    """Base class for every error raised by :mod:`aerialmanip`."""


class ValidationError(AerialManipError, ValueError):
    """Invalid parameters, configuration, or inputs."""


class SingularAttitude(AerialManipError):
    """Pitch angle too close to +/- pi/2 for the Euler-rate map."""


class SingularInertia(AerialManipError):
    """The coupled 6x6 mass matrix is (numerically) singular."""


class DegenerateMass(AerialManipError):
    """Manipulator mass is zero or negative where it is divided by."""


class InfeasibleWrench(AerialManipError):
    """Requested thrust/torque cannot be produced by non-negative rotor speeds."""


class NonFiniteMeasurement(AerialManipError):
    """A filter received NaN or inf."""


class EmptySeries(AerialManipError):
    """A metric was asked for over a series with no usable samples."""


class EmptyWindow(EmptySeries):
    """A metrics window selected no samples of a run log."""


class Infeasible(AerialManipError):
    """No certified LMI solution was found.

    Attributes:
        gamma: The L2-gain bound that was tried (or the bracket top).
        lam: The interconnection weight.
    """

    def __init__(self, message: str, gamma: float | None = None, lam: float | None = None):
        super().__init__(message)
        self.gamma = gamma
        self.lam = lam


class ThrustUnderflow(AerialManipError):
    """Commanded thrust below the floor needed to extract roll/pitch references."""


class Diverged(AerialManipError):
    """Closed-loop simulation left the admissible state region."""
