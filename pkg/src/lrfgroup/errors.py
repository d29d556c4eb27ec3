"""Exception types raised across the package."""


class LrfError(Exception):
    """Base class for all package errors."""


class ZeroRange(LrfError, ValueError):
    """Point coincides with the spherical origin, so its angles are undefined."""


class OutOfGimbalRange(LrfError, ValueError):
    pass


class EmptyInterval(LrfError, ValueError):
    pass


class TargetLost(LrfError):
    """No cluster in a locking pass could be associated with the tracked target.

    ``lock`` holds the lock state after the failed pass, including what it swept.
    """

    def __init__(self, message: str, lock=None):
        super().__init__(message)
        self.lock = lock


class OutOfGrid(LrfError):
    pass


class OutOfTimeRange(LrfError, ValueError):
    pass


class IoFailure(LrfError, OSError):
    pass


class FormatVersionMismatch(LrfError):
    """Map file has a bad magic, unknown version or is truncated."""


class ScenarioError(LrfError, ValueError):
    """Scenario document failed validation; ``location`` names the offending field or line."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
