"""Exception types raised by the solver library and the run driver."""


class DGLESError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(DGLESError, ValueError):
    pass


class DegenerateElementError(DGLESError):
    pass


class PositivityError(DGLESError):
    """Density or temperature became nonpositive at a quadrature node."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class NumericalBlowupError(DGLESError):
    """NaN or Inf appeared in the residual."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class NotReadyError(DGLESError):
    """Statistics were requested before any sample was accumulated."""


class ConfigError(DGLESError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CheckpointError(DGLESError):
    pass
