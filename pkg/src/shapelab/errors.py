"""Exception and warning types shared across the package."""


class AliasingError(ValueError):
    """Grid too coarse for the requested frequency band."""


class InvalidDensityError(ValueError):
    """Shift density is not normalized, negative or identically zero."""


class PriorTruncationError(RuntimeError):
    """Rejection sampler for the Sobolev-ball restricted prior ran out of attempts."""


class ChainDivergenceError(FloatingPointError):
    """The log-posterior of a Markov chain became NaN or infinite."""

    def __init__(self, message, state_dump=None):
        super().__init__(message)
        self.state_dump = state_dump


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class TruncationWarning(UserWarning):
    """Requested cutoff drops nonzero coefficients."""


class NonIdentifiableWarning(UserWarning):
    """A Fourier coefficient needed for identification vanishes."""


class BudgetWarning(UserWarning):
    """Monte Carlo budget too small for the requested precision."""
