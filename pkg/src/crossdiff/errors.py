"""Exception types shared across the package."""


class CrossDiffError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CrossDiffError):
    """Invalid configuration, spec, or precondition violation detected before compute."""


class QuadratureError(CrossDiffError):
    """Kernel construction quadrature failed to converge to the required tolerance."""


class StabilityError(CrossDiffError):
    """Explicit time step violates the advertised stability bound."""

    def __init__(self, message: str, ratio: float | None = None):
        super().__init__(message)
        self.ratio = ratio


class BlowupError(CrossDiffError):
    """Non-finite state encountered during time stepping."""

    def __init__(self, message: str, *, replica: int | None = None,
                 species: int | None = None, particle: int | None = None,
                 step: int | None = None):
        super().__init__(message)
        self.replica = replica
        self.species = species
        self.particle = particle
        self.step = step
