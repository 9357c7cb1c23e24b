"""Exception types shared across the toolkit."""


class CorsairError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CorsairError):
    """Raised when a configuration document is invalid.

    ``violations`` lists human-readable messages, each naming the offending
    key, so callers (and the CLI) can report every problem at once.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class IntegrationDivergedError(CorsairError):
    """A trajectory produced a non-finite coordinate; no clamping is done."""

    def __init__(self, t, what):
        self.t = t
        self.what = what
        super().__init__(f"integration diverged at t={t:.6g}: non-finite {what}")


class StepRejectedError(CorsairError):
    """A grid solver step violated its stability condition."""

    def __init__(self, dt, suggested_dt):
        self.dt = dt
        self.suggested_dt = suggested_dt
        super().__init__(
            f"step dt={dt:.6g} rejected by stability condition; "
            f"use dt <= {suggested_dt:.6g}"
        )
