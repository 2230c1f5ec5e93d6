"""Exception hierarchy shared across the package."""


class TruncqError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TruncqError):
    """Invalid kernel, smoother, bandwidth, model or experiment settings."""


class DegenerateSampleError(TruncqError):
    """Truncation kept fewer than two records; resampling is advised."""


class GenerationError(TruncqError):
    """Simulated draw failed an internal sanity bound."""


class DegenerateWeightsError(TruncqError):
    """Every record has a vanishing product-limit survival value."""


class NoLocalDataError(TruncqError):
    """No kernel mass at the query covariate; the CDF denominator is zero."""


class QuantileNotBracketedError(TruncqError):
    """Requested level lies outside the CDF range attained on the interval."""

    def __init__(self, p: float, attained_low: float, attained_high: float):
        self.p = p
        self.attained_low = attained_low
        self.attained_high = attained_high
        super().__init__(
            f"quantile level {p} outside attained CDF range "
            f"[{attained_low:.6g}, {attained_high:.6g}] on the search interval"
        )


class RateFitError(TruncqError):
    """Slope regression is impossible (too few sizes or nonpositive errors)."""


class NumericError(TruncqError):
    """A numerical routine (quadrature, root finding) failed to converge."""
