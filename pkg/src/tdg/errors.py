"""Exception types shared across the runtime."""


class TdgError(Exception):
    """Base class for all runtime errors raised by this package."""


class RecursiveRegionError(TdgError):
    """A region was entered (recorded or replayed) from inside itself."""


class ShapeDriftError(TdgError):
    """A re-recorded region produced a graph with a different shape."""


class SessionError(TdgError):
    """A recording session was used outside its lifecycle contract."""


class TaskBodyError(TdgError):
    """A task body raised; the run was aborted."""

    def __init__(self, task_id: int, cause: BaseException):
        super().__init__(f"task {task_id} raised {cause!r}")
        self.task_id = task_id
        self.cause = cause


class TdgFileError(TdgError):
    """A graph file failed to load or save.

    ``code`` identifies the malformation class so callers can react to a
    specific failure without parsing the message:

    * ``malformed-json``   not parseable as JSON
    * ``bad-version``      unknown or missing format version
    * ``id-gap``           task ids not contiguous from 0
    * ``forward-pred``     a predecessor id >= the task's own id
    * ``unknown-body-tag`` body tag missing from the body registry
    * ``bad-payload``      payload could not be encoded or decoded
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
