"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid configuration or arguments (CLI exit code 1)."""


class NumericalError(ArithmeticError):
    """A computation could not be completed to the requested accuracy (CLI exit code 2)."""


class PoleError(NumericalError):
    pass


class GridTooCoarseError(NumericalError):
    pass


class IntegrationError(NumericalError):
    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time
