"""Navigation graphs: panoramic nodes with 3D poses, traversability edges,
geodesic distances, and node snapping.

Graphs are immutable after construction and all operations are pure
functions, so concurrent reads are safe.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError

TWO_PI = 2.0 * math.pi

# Relative tolerance for edge length vs. Euclidean endpoint distance.
EDGE_LENGTH_RTOL = 1e-6


@dataclass(frozen=True)
class Pose:
    """Position in meters plus viewing direction of a panoramic node."""

    position: tuple[float, float, float]
    heading: float = 0.0
    elevation: float = 0.0

    def __post_init__(self):
        if len(self.position) != 3:
            raise ValidationError(f"position must have 3 components, got {len(self.position)}")
        pos = tuple(float(c) for c in self.position)
        if not all(math.isfinite(c) for c in pos):
            raise ValidationError(f"position components must be finite, got {pos}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "heading", float(self.heading))
        object.__setattr__(self, "elevation", float(self.elevation))
        if not 0.0 <= self.heading < TWO_PI:
            raise ValidationError(f"heading must lie in [0, 2*pi), got {self.heading}")
        if not -math.pi / 2 <= self.elevation <= math.pi / 2:
            raise ValidationError(f"elevation must lie in [-pi/2, pi/2], got {self.elevation}")

    @property
    def xyz(self) -> np.ndarray:
        return np.asarray(self.position, dtype=np.float64)


@dataclass(frozen=True)
class NavNode:
    id: str
    pose: Pose
    floor_index: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValidationError("node id must be non-empty")
        if self.floor_index < 0:
            raise ValidationError(f"floor_index must be >= 0, got {self.floor_index}")


@dataclass(frozen=True)
class NavEdge:
    """Undirected edge; endpoints stored in lexicographic order."""

    endpoints: tuple[str, str]
    length: float

    def __post_init__(self):
        a, b = self.endpoints
        if a == b:
            raise ValidationError(f"self-loop edge at node {a!r}")
        if a > b:
            object.__setattr__(self, "endpoints", (b, a))
        object.__setattr__(self, "length", float(self.length))
        if not self.length > 0.0:
            raise ValidationError(f"edge length must be > 0, got {self.length}")


class NavGraph:
    """Immutable navigation graph for one environment.

    Validates on construction: unique node ids, no self-loops or duplicate
    edges, edge endpoints present, and edge lengths consistent with the
    Euclidean distance between endpoint positions (rtol 1e-6).
    """

    def __init__(self, environment_id: str, nodes: list[NavNode], edges: list[NavEdge]):
        if not nodes:
            raise ValidationError("graph must contain at least one node")
        self.environment_id = environment_id
        self._nodes: dict[str, NavNode] = {}
        for node in nodes:
            if node.id in self._nodes:
                raise ValidationError(f"duplicate node id {node.id!r}")
            self._nodes[node.id] = node
        seen: set[tuple[str, str]] = set()
        for edge in edges:
            a, b = edge.endpoints
            for nid in (a, b):
                if nid not in self._nodes:
                    raise DataError(f"dangling endpoint: edge {edge.endpoints} references unknown node {nid!r}")
            if edge.endpoints in seen:
                raise ValidationError(f"duplicate edge {edge.endpoints}")
            seen.add(edge.endpoints)
            euclid = float(np.linalg.norm(self._nodes[a].pose.xyz - self._nodes[b].pose.xyz))
            if abs(edge.length - euclid) > EDGE_LENGTH_RTOL * max(euclid, 1.0):
                raise ValidationError(
                    f"edge {edge.endpoints} length {edge.length} inconsistent with "
                    f"endpoint distance {euclid} (rtol {EDGE_LENGTH_RTOL})"
                )
        self.edges: tuple[NavEdge, ...] = tuple(sorted(edges, key=lambda e: e.endpoints))
        adj: dict[str, list[tuple[str, float]]] = {nid: [] for nid in self._nodes}
        for edge in self.edges:
            a, b = edge.endpoints
            adj[a].append((b, edge.length))
            adj[b].append((a, edge.length))
        self._adjacency = {nid: tuple(sorted(nbrs)) for nid, nbrs in adj.items()}

    @classmethod
    def from_parts(cls, environment_id: str, nodes: list[NavNode],
                   edge_pairs: list[tuple[str, str]]) -> "NavGraph":
        """Build a graph from node objects and endpoint id pairs; edge lengths
        are computed from node positions."""
        by_id = {n.id: n for n in nodes}
        edges = []
        for a, b in edge_pairs:
            if a not in by_id or b not in by_id:
                missing = a if a not in by_id else b
                raise DataError(f"dangling endpoint: edge ({a!r}, {b!r}) references unknown node {missing!r}")
            length = float(np.linalg.norm(by_id[a].pose.xyz - by_id[b].pose.xyz))
            edges.append(NavEdge((a, b), length))
        return cls(environment_id, nodes, edges)

    @property
    def node_ids(self) -> list[str]:
        """Node ids in lexicographic order (the canonical prediction order)."""
        return sorted(self._nodes)

    @property
    def nodes(self) -> list[NavNode]:
        return [self._nodes[nid] for nid in self.node_ids]

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> NavNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise ValidationError(f"unknown node id {node_id!r} in environment {self.environment_id!r}") from None

    def neighbors(self, node_id: str) -> tuple[tuple[str, float], ...]:
        self.node(node_id)
        return self._adjacency[node_id]

    def positions(self) -> np.ndarray:
        """(N, 3) array of node positions, in node-id order."""
        return np.stack([self._nodes[nid].pose.xyz for nid in self.node_ids])

    def __eq__(self, other) -> bool:
        if not isinstance(other, NavGraph):
            return NotImplemented
        return (self.environment_id == other.environment_id
                and self._nodes == other._nodes
                and self.edges == other.edges)

    def __repr__(self) -> str:
        return (f"NavGraph({self.environment_id!r}, nodes={len(self._nodes)}, "
                f"edges={len(self.edges)})")


def single_source_distances(graph: NavGraph, source: str,
                            target: str | None = None) -> dict[str, float]:
    """Dijkstra from ``source``; stops early once ``target`` is settled.

    Returns settled geodesic distances; unreachable nodes are absent.
    """
    graph.node(source)
    dist: dict[str, float] = {}
    heap: list[tuple[float, str]] = [(0.0, source)]
    while heap:
        d, nid = heapq.heappop(heap)
        if nid in dist:
            continue
        dist[nid] = d
        if nid == target:
            break
        for nbr, length in graph.neighbors(nid):
            if nbr not in dist:
                heapq.heappush(heap, (d + length, nbr))
    return dist


def geodesic_distance(graph: NavGraph, a: str, b: str) -> float:
    """Shortest-path length along edges between nodes ``a`` and ``b``, in
    meters; +inf if disconnected, 0 iff a == b."""
    graph.node(a)
    graph.node(b)
    if a == b:
        return 0.0
    dist = single_source_distances(graph, a, target=b)
    return dist.get(b, math.inf)


def snap_to_node(graph: NavGraph, point) -> str:
    """Id of the node closest (Euclidean) to ``point``; ties broken by
    lexicographically smallest id."""
    p = np.asarray(point, dtype=np.float64).reshape(3)
    ids = graph.node_ids
    dists = np.linalg.norm(graph.positions() - p[None, :], axis=1)
    best = int(np.argmin(dists))  # argmin returns first occurrence = smallest id
    return ids[best]


def centroid_node(graph: NavGraph) -> str:
    """Node closest to the mean of all node positions.

    Stands in for the centroid of the full 3D scene, which is not available
    from the graph alone.
    """
    return snap_to_node(graph, graph.positions().mean(axis=0))


def save_graph(graph: NavGraph, path) -> None:
    """Write the graph as UTF-8 JSON; edge lengths are never stored."""
    payload = {
        "environment_id": graph.environment_id,
        "nodes": [
            {
                "id": n.id,
                "position": list(n.pose.position),
                "heading": n.pose.heading,
                "elevation": n.pose.elevation,
                "floor": n.floor_index,
            }
            for n in graph.nodes
        ],
        "edges": [list(e.endpoints) for e in graph.edges],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_graph(path) -> NavGraph:
    """Load a graph file; recomputes edge lengths from node positions.

    An edge entry may carry an optional third element with a stored length,
    which is validated against the computed length (rtol 1e-6).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"graph file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed graph file {path}: {exc}") from exc
    for key in ("environment_id", "nodes", "edges"):
        if key not in payload:
            raise DataError(f"graph file {path} missing key {key!r}")
    nodes = []
    try:
        for entry in payload["nodes"]:
            nodes.append(NavNode(
                id=entry["id"],
                pose=Pose(tuple(entry["position"]), entry.get("heading", 0.0),
                          entry.get("elevation", 0.0)),
                floor_index=int(entry.get("floor", 0)),
            ))
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed node entry in {path}: {exc}") from exc
    by_id = {n.id: n for n in nodes}
    if len(by_id) != len(nodes):
        raise DataError(f"duplicate node ids in {path}")
    edges = []
    for entry in payload["edges"]:
        if len(entry) not in (2, 3):
            raise DataError(f"malformed edge entry {entry!r} in {path}")
        a, b = entry[0], entry[1]
        for nid in (a, b):
            if nid not in by_id:
                raise DataError(f"dangling endpoint: edge {entry[:2]} references unknown node {nid!r}")
        length = float(np.linalg.norm(by_id[a].pose.xyz - by_id[b].pose.xyz))
        if len(entry) == 3:
            stored = float(entry[2])
            if abs(stored - length) > EDGE_LENGTH_RTOL * max(length, 1.0):
                raise DataError(
                    f"edge {entry[:2]} stored length {stored} inconsistent with "
                    f"positions (computed {length}) in {path}"
                )
        edges.append(NavEdge((a, b), length))
    try:
        return NavGraph(payload["environment_id"], nodes, edges)
    except (ValidationError, DataError) as exc:
        raise DataError(f"invalid graph in {path}: {exc}") from exc
