"""Exception types shared across the library."""


class TeledriftError(Exception):
    """Base class for all library errors."""


class NotSkewSymmetric(TeledriftError):
    """Matrix passed to vee() has a symmetric part above tolerance."""


class NearPiRotation(TeledriftError):
    """Rotation angle is within tolerance of pi; the log map is ill-conditioned."""


class FrameMismatch(TeledriftError):
    """Twist frame tag does not match the integration variant."""


class OutOfDomain(TeledriftError):
    """Argument norm outside the valid domain of the map (cot singularity)."""


class NotSPD(TeledriftError):
    """Matrix expected to be symmetric positive definite is not."""


class ConfigError(TeledriftError):
    """Scenario or gains configuration is invalid; message names the key path."""


class SimulationError(TeledriftError):
    """A module error occurred while stepping a scenario; carries tick context."""

    def __init__(self, tick: int, message: str):
        self.tick = tick
        super().__init__(f"tick {tick}: {message}")
