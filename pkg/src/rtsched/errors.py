"""Exception types raised across the package."""


class RtschedError(Exception):
    """Base class for all package errors."""


class ConfigError(RtschedError, ValueError):
    """A model or experiment configuration failed to parse or validate."""


class DimensionMismatch(RtschedError, ValueError):
    pass


class MalformedDecision(RtschedError):
    """A scheduling decision is not interference-free or schedules an empty job."""


class NotTwoApps(RtschedError, ValueError):
    pass


class InvalidInstance(RtschedError, ValueError):
    pass
