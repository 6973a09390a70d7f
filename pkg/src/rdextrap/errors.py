"""Exception types shared across the package."""


class RdExtrapError(Exception):
    """Base class for all rdextrap errors."""


class InvalidKernelError(RdExtrapError):
    """Kernel family unknown, or a kernel moment matrix is degenerate."""


class InsufficientLocalDataError(RdExtrapError):
    """Too few observations with positive kernel weight for a stable local fit."""

    def __init__(self, x0, bandwidth, message=None):
        self.x0 = float(x0)
        self.bandwidth = float(bandwidth)
        super().__init__(
            message
            or f"insufficient local data at x0={self.x0:g} with bandwidth {self.bandwidth:g}"
        )


class DegenerateDensityError(RdExtrapError):
    """Estimated running-variable density is numerically zero at the evaluation point."""


class PilotFailureError(RdExtrapError):
    """Global pilot fit used by the bandwidth selector is singular."""

    def __init__(self, message, fallback=False):
        self.fallback = bool(fallback)
        super().__init__(message)


class MissingArmError(RdExtrapError):
    """A required (treatment, cutoff, side) subsample is empty."""

    def __init__(self, d, c, side):
        self.d = d
        self.c = c
        self.side = side
        super().__init__(f"no observations in required arm (d={d}, c={c}, side={side})")


class WeakTakeupError(RdExtrapError):
    """Estimated take-up probability fell below the configured floor."""

    def __init__(self, x0, p_hat, p_min):
        self.x0 = float(x0)
        self.p_hat = float(p_hat)
        self.p_min = float(p_min)
        super().__init__(
            f"take-up estimate {self.p_hat:.4f} at x={self.x0:g} is below the floor {self.p_min:g}"
        )


class BootstrapInstabilityError(RdExtrapError):
    """More than the tolerated share of bootstrap replications was discarded."""


class InvalidVarianceError(RdExtrapError):
    """A nonfinite variance was passed to an inference routine."""


class InvalidSpecError(RdExtrapError):
    """Decision-model specification is invalid or produced a non-finite objective."""


class MonteCarloError(RdExtrapError):
    """Too many Monte Carlo repetitions failed."""


class IngestError(RdExtrapError):
    """CSV input could not be mapped to a valid sample."""

    def __init__(self, message, lines=()):
        self.lines = tuple(int(i) for i in lines)
        if self.lines:
            message = f"{message} (lines: {', '.join(str(i) for i in self.lines)})"
        super().__init__(message)
