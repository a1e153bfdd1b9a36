"""Exception types raised by :mod:`radmm`."""


class ParameterError(ValueError):
    """An argument is outside its admissible range."""


class DomainError(ValueError):
    """A point or value is not finite where a finite one is required."""


class InfeasibleGraphError(RuntimeError):
    """No connected graph could be drawn for the requested parameters."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    Parameters
    ----------
    key : str
        Dotted path of the offending configuration key.
    message : str
        Human readable reason.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
