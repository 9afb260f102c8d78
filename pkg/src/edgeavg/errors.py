"""Exception types shared across the package."""


class ConstructionError(ValueError):
    """A graph or lattice was requested with invalid dimensions."""


class ParameterError(ValueError):
    """A simulation routine was called with an invalid argument."""


class ConfigError(ValueError):
    """An experiment config or initial law is invalid.

    ``key`` is the dotted config key at fault, when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class EstimationError(ValueError):
    """Too few or non-finite samples for an estimator."""


class FitError(ValueError):
    """Power-law fit given unusable points."""


class InvariantError(RuntimeError):
    """A conservation law or monotonicity check failed during a run."""
