"""Task dependency graph data model.

A :class:`TaskGraph` is an immutable-after-finalize DAG whose nodes are task
instances and whose edges are data dependences.  Dependences only point to
earlier-created tasks, so the graph is acyclic by construction.  Run-state
(pending counters, completed flags) lives in a separate :class:`RunState` so
that replaying a graph never touches, or reallocates, the structure itself.
"""

from __future__ import annotations

import enum
import hashlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence


class DepKind(enum.Enum):
    IN = "in"
    OUT = "out"
    INOUT = "inout"


@dataclass(frozen=True)
class DepClause:
    """One dependence declaration: an access kind on an opaque 64-bit tag.

    Tag equality is the sole aliasing criterion; there is no overlap
    analysis.  Semantically a tag names a memory location or array element.
    """

    kind: DepKind
    tag: int


@dataclass(frozen=True)
class GraphId:
    """Source-location key of a graph: (file, line) is the identity."""

    file: str
    line: int
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.line < 0:
            raise ValueError(f"line must be non-negative, got {self.line}")

    def label(self) -> str:
        loc = f"{self.file}:{self.line}"
        return f"{self.name} ({loc})" if self.name else loc


@dataclass
class TaskNode:
    """One recorded task instance.

    ``preds`` and ``succs`` are sorted id lists; every predecessor id is
    smaller than ``id``.  The executable ``body`` is called as
    ``body(payload)`` and must return nothing.  ``body_tag`` is the identity
    used for structural hashing and serialization (payload values are not
    part of the shape).
    """

    id: int
    body: Optional[Callable]
    payload: object
    body_tag: str
    preds: list[int]
    succs: list[int] = field(default_factory=list)

    @property
    def indegree(self) -> int:
        return len(self.preds)


class RunState:
    """Mutable per-replay state for one graph instance.

    Everything here is preallocated when the state is created; a reset
    rewrites counters in place.  ``items`` holds one reusable queue entry
    per node so that scheduling a replay pushes preexisting objects instead
    of allocating new ones.
    """

    __slots__ = (
        "graph", "pending", "completed", "locks", "items",
        "dec_counts", "trace_buffers",
    )

    def __init__(self, graph: "TaskGraph"):
        n = len(graph.nodes)
        self.graph = graph
        self.pending = [node.indegree for node in graph.nodes]
        self.completed = [False] * n
        self.locks = [threading.Lock() for _ in range(n)]
        self.items = [(self, i) for i in range(n)]
        # populated by the scheduler when it attaches the state to a pool run
        self.dec_counts: list[int] = []
        self.trace_buffers: list[list] = []

    def reset(self) -> None:
        nodes = self.graph.nodes
        pending = self.pending
        completed = self.completed
        for i in range(len(nodes)):
            pending[i] = len(nodes[i].preds)
            completed[i] = False


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str]


class TaskGraph:
    """Finalized task dependency graph plus its default run-state."""

    def __init__(self, graph_id: GraphId, nodes: list[TaskNode]):
        self.id = graph_id
        self.nodes = nodes
        self.roots = [n.id for n in nodes if not n.preds]
        self.edge_count = sum(len(n.preds) for n in nodes)
        self.structural_hash = _hash_shape(nodes)
        self.finalized = True
        self._default_run_state: Optional[RunState] = None

    def __len__(self) -> int:
        return len(self.nodes)

    def run_state(self) -> RunState:
        """Default run-state, created once and reused across replays."""
        if self._default_run_state is None:
            self._default_run_state = RunState(self)
        return self._default_run_state

    def new_run_state(self) -> RunState:
        """Fresh instance-local run-state (used by overlapping instances)."""
        return RunState(self)


def build_graph(graph_id: GraphId, specs: Sequence[tuple]) -> TaskGraph:
    """Assemble a finalized graph from (body, payload, body_tag, preds) rows.

    Ids are assigned by position.  Successor lists, roots, edge count and
    the structural hash are derived here; preds are sorted and deduplicated.
    """
    nodes: list[TaskNode] = []
    for i, (body, payload, body_tag, preds) in enumerate(specs):
        nodes.append(TaskNode(
            id=i, body=body, payload=payload, body_tag=body_tag,
            preds=sorted(set(preds)),
        ))
    for node in nodes:
        for p in node.preds:
            nodes[p].succs.append(node.id)
    for node in nodes:
        node.succs.sort()
    return TaskGraph(graph_id, nodes)


def _hash_shape(nodes: Sequence[TaskNode]) -> int:
    """64-bit digest of the graph shape.

    Depends only on node count, per-node body tags and pred lists.  Payload
    values, timings and queue placement are deliberately excluded: two
    recordings of a region with identical control flow must collide.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(b"n=%d;" % len(nodes))
    for node in nodes:
        h.update(node.body_tag.encode("utf-8", "replace"))
        h.update(b"|")
        h.update(",".join(map(str, node.preds)).encode())
        h.update(b";")
    return int.from_bytes(h.digest(), "big")


def structural_hash(graph: TaskGraph) -> int:
    return _hash_shape(graph.nodes)


def validate(graph: TaskGraph) -> ValidationReport:
    """Check structural invariants, returning all violations found."""
    problems: list[str] = []
    if not graph.finalized:
        problems.append("graph not finalized")
    nodes = graph.nodes
    for node in nodes:
        if node.preds != sorted(set(node.preds)):
            problems.append(f"preds of {node.id} not sorted/unique: {node.preds}")
        for p in node.preds:
            if not 0 <= p < node.id:
                problems.append(f"pred {p} of node {node.id} does not point backwards")
            elif node.id not in nodes[p].succs:
                problems.append(f"edge asymmetry at ({p},{node.id}): missing succ entry")
        for s in node.succs:
            if not node.id < s < len(nodes):
                problems.append(f"succ {s} of node {node.id} out of range")
            elif node.id not in nodes[s].preds:
                problems.append(f"edge asymmetry at ({node.id},{s}): missing pred entry")
        if node.indegree != len(node.preds):
            problems.append(f"indegree mismatch at {node.id}")
    expected_roots = [n.id for n in nodes if not n.preds]
    if graph.roots != expected_roots:
        problems.append(f"roots {graph.roots} != nodes with indegree 0 {expected_roots}")
    edge_count = sum(len(n.preds) for n in nodes)
    if graph.edge_count != edge_count:
        problems.append(f"edge_count {graph.edge_count} != sum of indegrees {edge_count}")
    if edge_count != sum(len(n.succs) for n in nodes):
        problems.append("sum of succs != sum of preds")
    return ValidationReport(ok=not problems, problems=problems)


def reset_run_state(graph: TaskGraph) -> None:
    """Set every pending counter back to its indegree, clear completed flags.

    Reuses the preallocated counters; no new structures are created.  Must
    not be called while a replay of this state is in progress.
    """
    graph.run_state().reset()


def export_dot(graph: TaskGraph, title: Optional[str] = None) -> str:
    """Render the graph as DOT text, one edge line per directed edge."""
    lines = ["digraph tdg {"]
    label = title if title is not None else graph.id.label()
    lines.append(f'  label="{label}";')
    for node in graph.nodes:
        lines.append(f'  {node.id} [label="{node.id}: {node.body_tag}"];')
    for node in graph.nodes:
        for s in node.succs:
            lines.append(f"  {node.id} -> {s};")
    lines.append("}")
    return "\n".join(lines) + "\n"
