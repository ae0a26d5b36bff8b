"""Error taxonomy for the runtime.

Three families: caller mistakes (usage), exhausted fixed-size resources
(resource), and broken internal invariants (internal).  Deadlock is not an
error; it is a reported run outcome.
"""


class SynchronError(Exception):
    """Base class for all runtime errors."""


class UsageError(SynchronError):
    """The caller violated an API precondition."""


class ResourceError(SynchronError):
    """A fixed-capacity resource (channels, process slots) is exhausted."""


class InternalError(SynchronError):
    """An internal invariant was violated; always a bug, never user error."""
