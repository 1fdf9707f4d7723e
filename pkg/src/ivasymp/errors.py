"""Exception types shared across the package."""


class ImpliedVolError(ValueError):
    """Base class for domain errors (bad quotes, regime violations)."""


class ArbitrageBandError(ImpliedVolError):
    """Price outside the open no-arbitrage band ((S-K)_+, S)."""


class RegimeError(ImpliedVolError):
    """Inputs fall outside the regime an expansion was built for."""


class ConvergenceError(ImpliedVolError):
    """An iteration failed to converge; the last iterate is attached."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
