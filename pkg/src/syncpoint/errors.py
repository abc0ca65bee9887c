"""Common error base.

Every domain error carries a stable ``code`` (SCREAMING_SNAKE) so the server
can surface it on the wire as an ``Err`` frame without per-exception mapping
tables.
"""


class SyncError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "ERROR"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail or self.code
