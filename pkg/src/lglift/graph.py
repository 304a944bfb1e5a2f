"""Graph and line-graph data model.

A network is an undirected graph whose edges carry lengths (and optionally
observation values); the line graph maps every edge to a new vertex, with
new vertices adjacent exactly when their source edges share one endpoint.
Everything here is immutable after construction and safe to share.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Set, Tuple

Id = Hashable
Coord = Tuple[float, float]


class GraphError(ValueError):
    """Invalid graph structure or unusable metric inputs."""


class MetricMode(str, Enum):
    COORDINATE = "coordinate"
    PATH_LENGTH = "path_length"


@dataclass(frozen=True)
class EdgeRec:
    """An undirected edge {u, v} with optional length and observation value."""

    id: Id
    u: Id
    v: Id
    length: Optional[float] = None
    value: Optional[float] = None

    @property
    def pair(self) -> FrozenSet[Id]:
        return frozenset((self.u, self.v))


class Graph:
    """Undirected graph with optional 2-D vertex coordinates.

    Edge lengths default to the Euclidean endpoint distance when both
    endpoints carry coordinates; explicit lengths take precedence.
    """

    def __init__(
        self,
        vertices: Sequence[Tuple[Id, Optional[Coord]]],
        edges: Sequence[EdgeRec],
    ) -> None:
        self.coords: Dict[Id, Optional[Coord]] = {}
        for vid, xy in vertices:
            if vid in self.coords:
                raise GraphError(f"duplicate vertex id {vid!r}")
            self.coords[vid] = (float(xy[0]), float(xy[1])) if xy is not None else None

        seen_pairs: Set[FrozenSet[Id]] = set()
        seen_ids: Set[Id] = set()
        resolved: List[EdgeRec] = []
        for e in edges:
            if e.id in seen_ids:
                raise GraphError(f"duplicate edge id {e.id!r}")
            seen_ids.add(e.id)
            if e.u not in self.coords or e.v not in self.coords:
                raise GraphError(f"edge {e.id!r} references unknown vertex")
            if e.u == e.v:
                raise GraphError(f"edge {e.id!r} is a self-loop")
            if e.pair in seen_pairs:
                raise GraphError(f"duplicate edge between {e.u!r} and {e.v!r}")
            seen_pairs.add(e.pair)
            length = e.length
            if length is None:
                cu, cv = self.coords[e.u], self.coords[e.v]
                if cu is not None and cv is not None:
                    length = math.dist(cu, cv)
            if length is not None and not length > 0:
                raise GraphError(f"edge {e.id!r} has non-positive length {length}")
            resolved.append(EdgeRec(e.id, e.u, e.v, length, e.value))
        self.edges: Tuple[EdgeRec, ...] = tuple(resolved)
        self.edge_by_id: Dict[Id, EdgeRec] = {e.id: e for e in self.edges}

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def m(self) -> int:
        return len(self.edges)

    def vertex_ids(self) -> List[Id]:
        return list(self.coords)

    def has_all_coords(self) -> bool:
        return all(c is not None for c in self.coords.values())

    def has_all_lengths(self) -> bool:
        return all(e.length is not None for e in self.edges)

    def is_connected(self) -> bool:
        return is_connected(self.vertex_ids(), [(e.u, e.v) for e in self.edges])

    def edge_values(self) -> Dict[Id, float]:
        out = {}
        for e in self.edges:
            if e.value is not None:
                out[e.id] = e.value
        return out


class LineGraph:
    """Line graph: one new vertex per source edge, plus a metric provider.

    New vertices inherit the source edge ids.  Coordinates, when present,
    are the source-edge midpoints (or station coordinates in station mode).
    """

    def __init__(
        self,
        ids: Sequence[Id],
        adjacency: Dict[Id, Set[Id]],
        coords: Optional[Dict[Id, Coord]] = None,
        edge_lengths: Optional[Dict[Id, float]] = None,
        values: Optional[Dict[Id, float]] = None,
    ) -> None:
        self.ids: Tuple[Id, ...] = tuple(ids)
        self.index: Dict[Id, int] = {k: i for i, k in enumerate(self.ids)}
        self.adjacency: Dict[Id, FrozenSet[Id]] = {
            k: frozenset(adjacency.get(k, ())) for k in self.ids
        }
        for k, nbrs in self.adjacency.items():
            if k in nbrs:
                raise GraphError(f"line-graph self-adjacency at {k!r}")
            for s in nbrs:
                if k not in self.adjacency[s]:
                    raise GraphError("line-graph adjacency is not symmetric")
        self.coords = dict(coords) if coords else None
        self.edge_lengths = dict(edge_lengths) if edge_lengths else None
        self.values = dict(values) if values else None

    @property
    def m(self) -> int:
        return len(self.ids)

    def edges(self) -> List[FrozenSet[Id]]:
        out = []
        for k in self.ids:
            for s in self.adjacency[k]:
                if self.index[k] < self.index[s]:
                    out.append(frozenset((k, s)))
        return out

    def degree(self, k: Id) -> int:
        return len(self.adjacency[k])

    def base_distances(self) -> Dict[FrozenSet[Id], float]:
        """Adjacent-pair distances (l_k + l_l)/2 for the path-length metric."""
        if self.edge_lengths is None:
            raise GraphError("metric inputs unavailable: no source edge lengths")
        out = {}
        for pair in self.edges():
            k, s = tuple(pair)
            out[pair] = 0.5 * (self.edge_lengths[k] + self.edge_lengths[s])
        return out

    def distance(self, k: Id, l: Id, mode: MetricMode) -> float:
        """Distance between two new vertices under the chosen metric.

        Coordinate mode is the Euclidean distance between stored
        coordinates; path-length mode is (l_k + l_l)/2 for adjacent pairs
        and otherwise the shortest path through the line-graph structure.
        """
        if k == l:
            raise GraphError("distance requires two distinct new vertices")
        if mode is MetricMode.COORDINATE:
            if self.coords is None or k not in self.coords or l not in self.coords:
                raise GraphError("metric inputs unavailable: missing coordinates")
            return math.dist(self.coords[k], self.coords[l])
        base = self.base_distances()
        pair = frozenset((k, l))
        if pair in base:
            return base[pair]
        d = shortest_path_distance(self.adjacency, base, k, l)
        if d is None:
            raise GraphError(f"disconnected in metric: {k!r} and {l!r}")
        return d


def build_line_graph(graph: Graph) -> LineGraph:
    """Map a graph onto its line graph.

    New vertices are in bijection with source edges; {v*_k, v*_l} is a new
    edge iff source edges e_k and e_l share exactly one vertex.  Midpoint
    coordinates are populated when source coordinates exist.
    """
    if graph.m < 3:
        raise GraphError(f"graph too small: {graph.m} edges, need at least 3")
    if not graph.is_connected():
        raise GraphError("source graph disconnected")

    incident: Dict[Id, List[Id]] = {v: [] for v in graph.coords}
    for e in graph.edges:
        incident[e.u].append(e.id)
        incident[e.v].append(e.id)

    adjacency: Dict[Id, Set[Id]] = {e.id: set() for e in graph.edges}
    for v, eids in incident.items():
        for a, b in combinations(eids, 2):
            # edges sharing two vertices would be duplicates, excluded upstream
            adjacency[a].add(b)
            adjacency[b].add(a)

    coords = None
    if graph.has_all_coords():
        coords = {}
        for e in graph.edges:
            (x1, y1), (x2, y2) = graph.coords[e.u], graph.coords[e.v]
            coords[e.id] = (0.5 * (x1 + x2), 0.5 * (y1 + y2))

    lengths = None
    if graph.has_all_lengths():
        lengths = {e.id: e.length for e in graph.edges}

    values = graph.edge_values() or None
    return LineGraph([e.id for e in graph.edges], adjacency, coords, lengths, values)


def is_connected(vertices: Iterable[Id], edges: Iterable[Tuple[Id, Id]]) -> bool:
    """True iff the subgraph on `vertices` with `edges` has one component.

    The empty vertex set counts as connected.  Edges must reference subset
    vertices only.
    """
    verts = set(vertices)
    if not verts:
        return True
    adj: Dict[Id, Set[Id]] = {v: set() for v in verts}
    for u, v in edges:
        if u not in verts or v not in verts:
            raise GraphError("edge references vertex outside the subset")
        adj[u].add(v)
        adj[v].add(u)
    start = next(iter(verts))
    seen = {start}
    stack = [start]
    while stack:
        for s in adj[stack.pop()]:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return len(seen) == len(verts)


def shortest_path_distance(
    adjacency: Dict[Id, Iterable[Id]],
    edge_dist: Dict[FrozenSet[Id], float],
    source: Id,
    target: Optional[Id] = None,
) -> Optional[object]:
    """Dijkstra over an adjacency map with per-edge distances.

    With a target, returns its distance (None if unreachable); without,
    returns the full distance dict from `source`.
    """
    dist: Dict[Id, float] = {source: 0.0}
    done: Set[Id] = set()
    counter = 0
    heap: List[Tuple[float, int, Id]] = [(0.0, counter, source)]
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if target is not None and u == target:
            return d
        for s in adjacency.get(u, ()):
            w = edge_dist[frozenset((u, s))]
            nd = d + w
            if nd < dist.get(s, math.inf):
                dist[s] = nd
                counter += 1
                heapq.heappush(heap, (nd, counter, s))
    if target is not None:
        return None
    return dist


def minimum_spanning_tree(
    vertices: Sequence[Id],
    weighted_edges: Sequence[Tuple[Id, Id, float]],
) -> List[Tuple[Id, Id, float]]:
    """Kruskal MST with a deterministic tie-break.

    Candidate edges are processed in lexicographic (weight, smaller id,
    larger id) order so the result is reproducible across runs.
    """
    if not vertices:
        raise GraphError("minimum_spanning_tree requires at least one vertex")
    for _, _, w in weighted_edges:
        if not (math.isfinite(w) and w > 0):
            raise GraphError(f"non-positive or non-finite edge weight {w}")

    order = {v: i for i, v in enumerate(sorted(vertices, key=repr))}

    def key(e: Tuple[Id, Id, float]):
        a, b = sorted((order[e[0]], order[e[1]]))
        return (e[2], a, b)

    parent = {v: v for v in vertices}

    def find(v):
        root = v
        while parent[root] != root:
            root = parent[root]
        while parent[v] != root:
            parent[v], v = root, parent[v]
        return root

    tree: List[Tuple[Id, Id, float]] = []
    for u, v, w in sorted(weighted_edges, key=key):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            tree.append((u, v, w))
            if len(tree) == len(vertices) - 1:
                break
    if len(tree) != len(vertices) - 1:
        raise GraphError("cannot span: weighted edges do not connect the vertices")
    return tree


def euclidean_mst(points: Sequence[Tuple[Id, Coord]]) -> List[Tuple[Id, Id, float]]:
    """MST of points under Euclidean distance (all pairs considered)."""
    if len(points) < 2:
        raise GraphError("euclidean_mst requires at least two points")
    edges = [
        (a, b, math.dist(ca, cb))
        for (a, ca), (b, cb) in combinations(points, 2)
    ]
    return minimum_spanning_tree([p[0] for p in points], edges)
