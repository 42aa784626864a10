"""Exception types shared across the package."""


class VocalRecruitError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(VocalRecruitError, ValueError):
    pass


class InvalidInputError(VocalRecruitError, ValueError):
    pass


class SynthesisError(VocalRecruitError, RuntimeError):
    """Raised when the tube model cannot produce three formants.

    ``timestep`` is set when the failure happened inside a trajectory.
    """

    def __init__(self, message, timestep=None):
        if timestep is not None:
            message = f"{message} (timestep {timestep})"
        super().__init__(message)
        self.timestep = timestep


class AdapterProtocolError(VocalRecruitError, RuntimeError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OptimizationAborted(VocalRecruitError, RuntimeError):
    pass


class EmptyAggregateError(VocalRecruitError, ValueError):
    pass
