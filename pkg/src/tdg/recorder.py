"""Graph recording: observe task creations, resolve dependences once.

Dependence resolution follows the last-writer/reader-set discipline: a
reader depends on the last writer of its tag, a writer depends on every
reader seen since the last writer (or on the last writer itself when no
reads intervened).  Tracker entries are created on first touch of a tag and
never removed for the lifetime of a session, so edges to tasks that already
finished executing can still be established.

Recording is single-producer: exactly one thread creates tasks and touches
the tracker.  In record-and-execute mode, worker threads may complete tasks
concurrently; that interaction is confined to the scheduler's run object.
"""

from __future__ import annotations

import enum
import threading
from typing import Callable, Iterable, Optional

from .errors import RecursiveRegionError, SessionError
from .graph import DepClause, DepKind, GraphId, TaskGraph, build_graph


class TagEntry:
    """Per-tag bookkeeping: the last writer and readers seen since."""

    __slots__ = ("last_writer", "readers")

    def __init__(self):
        self.last_writer: Optional[int] = None
        self.readers: list[int] = []


class DepTracker:
    """Map from dependence tag to its :class:`TagEntry`. Entries persist."""

    def __init__(self):
        self.entries: dict[int, TagEntry] = {}

    def entry(self, tag: int) -> TagEntry:
        e = self.entries.get(tag)
        if e is None:
            e = TagEntry()
            self.entries[tag] = e
        return e

    def __len__(self) -> int:
        return len(self.entries)


def resolve_dependences(tracker: DepTracker, new_id: int,
                        clauses: Iterable[DepClause]) -> set[int]:
    """Compute the predecessor set of a new task and update the tracker.

    ``new_id`` must exceed every id already registered, which rules out
    self-edges.  A task carrying both a read and a write clause on the same
    tag is treated as inout on that tag.
    """
    # merge clause kinds per tag first, then apply one access per tag
    per_tag: dict[int, bool] = {}
    order: list[int] = []
    for c in clauses:
        writes = c.kind in (DepKind.OUT, DepKind.INOUT)
        if c.tag in per_tag:
            per_tag[c.tag] = per_tag[c.tag] or writes
        else:
            per_tag[c.tag] = writes
            order.append(c.tag)

    preds: set[int] = set()
    for tag in order:
        entry = tracker.entry(tag)
        if per_tag[tag]:
            if entry.readers:
                preds.update(entry.readers)
            elif entry.last_writer is not None:
                preds.add(entry.last_writer)
            entry.last_writer = new_id
            entry.readers.clear()
        else:
            if entry.last_writer is not None:
                preds.add(entry.last_writer)
            entry.readers.append(new_id)
    return preds


class RecordMode(enum.Enum):
    RECORD_ONLY = "record-only"
    RECORD_AND_EXECUTE = "record-and-execute"


# GraphIds with an unfinalized session; guards against recursive recording.
_open_sessions: set[GraphId] = set()
_open_lock = threading.Lock()


class RecordingSession:
    """Builds a TaskGraph from a stream of task creations.

    In ``RECORD_AND_EXECUTE`` mode each recorded task is also handed to an
    executor (see ``scheduler.DynamicRun``), so the first execution of a
    region does useful work while the graph is captured.  In
    ``RECORD_ONLY`` mode bodies are deferred to the first replay.
    """

    def __init__(self, graph_id: GraphId, mode: RecordMode = RecordMode.RECORD_ONLY,
                 executor=None):
        with _open_lock:
            if graph_id in _open_sessions:
                raise RecursiveRegionError(
                    f"recursive taskgraph: region {graph_id.label()} is already recording")
            _open_sessions.add(graph_id)
        self.graph_id = graph_id
        self.mode = mode
        self.tracker = DepTracker()
        self.next_id = 0
        self._specs: list[tuple] = []
        self._executor = executor
        self._consumed = False
        if mode is RecordMode.RECORD_AND_EXECUTE and executor is None:
            raise SessionError("record-and-execute requires an executor")

    def __enter__(self) -> "RecordingSession":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if not self._consumed:
            self.abort()

    def record_task(self, body: Callable, payload: object = None, *,
                    clauses: Iterable[DepClause] = (), tag: Optional[str] = None) -> int:
        """Append one task; returns its creation-order id."""
        if self._consumed:
            raise SessionError("session consumed")
        tid = self.next_id
        self.next_id += 1
        preds = resolve_dependences(self.tracker, tid, clauses)
        body_tag = tag if tag is not None else _default_tag(body)
        self._specs.append((body, payload, body_tag, sorted(preds)))
        if self._executor is not None:
            self._executor.add_task(body, payload, preds)
        return tid

    def task_count(self) -> int:
        return self.next_id

    def finalize(self) -> TaskGraph:
        """Freeze the session into a finalized, registered graph.

        In record-and-execute mode every recorded task must already have
        completed; the caller is responsible for waiting for quiescence.
        """
        if self._consumed:
            raise SessionError("session consumed")
        if self._executor is not None and not self._executor.quiesced():
            raise SessionError(
                f"finalize with incomplete tasks in region {self.graph_id.label()}")
        self._consumed = True
        with _open_lock:
            _open_sessions.discard(self.graph_id)
        return build_graph(self.graph_id, self._specs)

    def abort(self) -> None:
        """Drop the session without producing a graph."""
        self._consumed = True
        with _open_lock:
            _open_sessions.discard(self.graph_id)


def begin_recording(graph_id: GraphId, mode: RecordMode = RecordMode.RECORD_ONLY,
                    executor=None) -> RecordingSession:
    return RecordingSession(graph_id, mode, executor)


def _default_tag(body: Callable) -> str:
    mod = getattr(body, "__module__", "?")
    qual = getattr(body, "__qualname__", repr(body))
    return f"{mod}.{qual}"
