"""Exception types raised by the packed convolution engine."""


class PackconvError(Exception):
    """Base class for all engine errors."""


class BoundExceeded(PackconvError):
    """Companding range is above the error-free unpacking limit of a packing mode."""

    def __init__(self, mode, r_max, limit):
        self.mode = mode
        self.r_max = r_max
        self.limit = limit
        super().__init__(
            f"companding range {r_max} exceeds the {mode.label} limit {limit}; "
            "error-free unpacking is not guaranteed"
        )


class IndexOverrun(PackconvError):
    """A packing request reads past the end of the block it was given."""


class UnpackOverflow(PackconvError):
    """A recovered integer lies outside the declared companding range."""


class BackendPrecisionFailure(PackconvError):
    """A convolution backend was flagged as too imprecise for a packing regime."""


class SeamMismatch(PackconvError):
    """Adjacent overlap-save blocks disagree on a shared output sample."""


class DegenerateSignal(PackconvError):
    """A statistic or ratio is undefined because a signal has zero energy."""


class ConfigError(PackconvError):
    """Invalid benchmark or command-line configuration."""
