"""Sink-initiated flooding that builds per-node multipath forwarding tables.

One flood builds every path: the sink sends a route request to each radio
neighbor, and the request's path id is fixed there — it is the id of that
first sensor crossed when walking from the sink outward.  Nodes keep one
table entry per path id (best quality seen so far) and re-forward a path id
only when its recorded quality strictly improves, which bounds the flood and
guarantees termination.

Path quality is the bottleneck residual energy of the route at construction
time, frozen for the whole run.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

from .scenario import Topology


class UnreachableError(RuntimeError):
    """One or more sources ended route construction with an empty path table."""

    def __init__(self, sources):
        self.sources = list(sources)
        super().__init__(f"sources with no path to the sink: {self.sources}")


class BrokenPathError(RuntimeError):
    """A trace hit a node with no entry for the requested path id."""


class RoutingLoopError(RuntimeError):
    """A trace revisited a node."""


@dataclass
class PathTableEntry:
    pid: int
    in_use: bool
    next_node: int
    quality: float
    rate: float = 0.0
    hops: int = 0


@dataclass(frozen=True)
class RouteRequest:
    pid: int
    hop_count: int
    quality_so_far: float
    sender: int


def path_quality(path_nodes, energies) -> float:
    """Bottleneck (minimum) residual energy over the path's sensor nodes."""
    if not path_nodes:
        raise ValueError("path must contain at least one sensor")
    return min(energies[v] for v in path_nodes)


def handle_request(node_id: int, table: dict, energy: float, request: RouteRequest):
    """Update a node's table for an incoming route request.

    Returns the request to re-forward (sender rewritten, hop count bumped,
    quality capped by this node's energy), or None when the known entry for
    that path id is at least as good.
    """
    quality = min(request.quality_so_far, energy)
    entry = table.get(request.pid)
    if entry is not None and entry.quality >= quality:
        return None
    table[request.pid] = PathTableEntry(
        pid=request.pid,
        in_use=False,
        next_node=request.sender,
        quality=quality,
        hops=request.hop_count + 1,
    )
    return replace(request, hop_count=request.hop_count + 1, quality_so_far=quality, sender=node_id)


def _sort_entries(entries):
    entries.sort(key=lambda e: (-e.quality, e.hops, e.pid))


def build_paths(topology: Topology, sources=()) -> dict:
    """Flood route requests from the sink and return {node_id: [PathTableEntry]}.

    Entries are sorted best-first (quality desc, then hops asc, then pid asc).
    Source tables keep a single entry per next hop.  Raises UnreachableError
    if any designated source ends up with an empty table.
    """
    sink = topology.sink_id
    neigh = {v: topology.neighbors(v) for v in range(topology.positions.shape[0])}
    tables: dict[int, dict] = {v: {} for v in range(topology.positions.shape[0]) if v != sink}

    queue = deque()
    for first in sorted(neigh[sink]):
        queue.append((first, RouteRequest(pid=first, hop_count=0, quality_so_far=float("inf"), sender=sink)))
    while queue:
        node, request = queue.popleft()
        if node == sink:
            continue
        forward = handle_request(node, tables[node], topology.energies[node], request)
        if forward is None:
            continue
        for nxt in sorted(neigh[node]):
            if nxt != request.sender and nxt != sink:
                queue.append((nxt, forward))

    out = {}
    for node, table in tables.items():
        entries = list(table.values())
        _sort_entries(entries)
        out[node] = entries
    source_set = set(sources)
    for s in source_set:
        seen_next = set()
        deduped = []
        for e in out.get(s, []):
            if e.next_node in seen_next:
                continue
            seen_next.add(e.next_node)
            deduped.append(e)
        out[s] = deduped
    missing = sorted(s for s in source_set if not out.get(s))
    if missing:
        raise UnreachableError(missing)
    return out


def path_trace(tables: dict, start: int, pid: int, sink_id: int) -> list:
    """Nodes from start to sink following next_node pointers for one path id."""
    if start == sink_id:
        return [sink_id]
    trace = [start]
    seen = {start}
    node = start
    while node != sink_id:
        entry = next((e for e in tables.get(node, []) if e.pid == pid), None)
        if entry is None:
            raise BrokenPathError(f"node {node} has no entry for path {pid}")
        node = entry.next_node
        if node in seen:
            raise RoutingLoopError(f"path {pid} revisits node {node}")
        seen.add(node)
        trace.append(node)
    return trace


def dump_tables(tables: dict) -> str:
    """One line per entry: node, pid, next, quality, in_use, rate."""
    lines = []
    for node in sorted(tables):
        for e in tables[node]:
            lines.append(
                f"{node} {e.pid} {e.next_node} {e.quality:.9g} {int(e.in_use)} {e.rate:.9g}"
            )
    return "\n".join(lines)
