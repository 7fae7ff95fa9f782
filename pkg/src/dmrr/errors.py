"""Exception types shared across the package."""


class DmrrError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(DmrrError):
    """A data, label, or score file could not be parsed."""


class DimensionError(DmrrError):
    """Array shapes or sizes are inconsistent with what an operation needs."""


class DegenerateDataError(DmrrError):
    """The data admits no positive kernel bandwidth (e.g. all points coincide)."""


class NumericalError(DmrrError):
    """A solver produced a non-finite quantity.

    Carries the iteration index and the offending iterate for diagnosis.
    """

    def __init__(self, message, iteration=None, state=None):
        super().__init__(message)
        self.iteration = iteration
        self.state = state


class ConfigError(DmrrError):
    """An experiment configuration is invalid."""


class ExperimentError(DmrrError):
    """A pipeline stage failed; the message names the stage and grid cell."""
