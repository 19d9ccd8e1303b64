"""Exception hierarchy shared by all pixelmimo modules."""


class PixelMimoError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(PixelMimoError, ValueError):
    pass


class SingularNetworkError(PixelMimoError, ArithmeticError):
    def __init__(self, message, coder=None):
        super().__init__(message)
        self.coder = coder


class DegeneratePatternError(PixelMimoError, ArithmeticError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class SynthesisError(PixelMimoError, RuntimeError):
    pass


class ParseError(PixelMimoError, ValueError):
    """Malformed model/channel/config file. ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.detail = message


class InvalidCovarianceError(PixelMimoError, ValueError):
    pass


class CapExceededError(PixelMimoError, RuntimeError):
    def __init__(self, n_vars, cap):
        super().__init__(
            f"exhaustive search needs 2^{n_vars} = {2 ** n_vars} evaluations, "
            f"cap is 2^{cap}")
        self.n_vars = n_vars
        self.cap = cap
        self.required = 2 ** n_vars


class SolverTimeout(PixelMimoError, RuntimeError):
    pass


class UsageError(PixelMimoError, ValueError):
    pass
