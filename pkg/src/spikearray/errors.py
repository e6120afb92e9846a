"""Exception types shared across the emulator."""


class ValidationError(ValueError):
    """Raised when inputs or configuration violate a documented contract."""


class NumericalOverflowError(ArithmeticError):
    """A state variable became non-finite during integration."""

    def __init__(self, variable, value):
        super().__init__(f"non-finite value for {variable}: {value!r}")
        self.variable = variable
        self.value = value


class RoutingError(RuntimeError):
    """An address-event could not be routed (e.g. target chip outside the grid)."""


class ConfigError(ValidationError):
    """Configuration document failed validation.

    ``errors`` holds every problem found, each prefixed with the path of the
    offending field (``ifat.lut[3].dst: ...``).
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid config")
