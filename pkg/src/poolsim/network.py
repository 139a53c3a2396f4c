"""Road network: graph container, grid generator, CSV import, shortest paths.

Distances are precomputed for every node pair when the network is built, so
the network is read-only afterwards and cheap to query from the simulator's
inner loops. This is fine for city-sized graphs up to a few thousand nodes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import NodeNotFound, ParseError, Unreachable, ValidationError

KMH = 1000.0 / 3600.0  # km/h -> m/s
DEFAULT_SPEED = 36 * KMH

NODES_HEADER = ["node_id", "x_m", "y_m"]
EDGES_HEADER = ["from_id", "to_id", "length_m"]


@dataclass(frozen=True)
class Route:
    nodes: tuple
    length: float  # meters
    duration: float  # seconds


class Network:
    """Directed road graph with a single network-wide speed (m/s).

    `nodes` is an iterable of (node_id, x, y); `edges` of (from, to, length).
    Parallel edges are collapsed to the shortest one.
    """

    def __init__(self, nodes, edges, speed=DEFAULT_SPEED):
        if not speed > 0:
            raise ValidationError(f"speed must be positive, got {speed}")
        self.speed = float(speed)

        coords = {}
        for nid, x, y in nodes:
            nid = int(nid)
            if nid in coords:
                raise ValidationError(f"duplicate node id {nid}")
            coords[nid] = (float(x), float(y))
        if not coords:
            raise ValidationError("network has no nodes")
        self.node_ids = tuple(sorted(coords))
        self.coords = {n: coords[n] for n in self.node_ids}
        self._index = {n: i for i, n in enumerate(self.node_ids)}

        best = {}
        for u, v, length in edges:
            u, v, length = int(u), int(v), float(length)
            for n in (u, v):
                if n not in self._index:
                    raise NodeNotFound(f"edge ({u}, {v}) references unknown node {n}")
            if not length > 0:
                raise ValidationError(f"edge ({u}, {v}) has non-positive length {length}")
            if u == v:
                continue
            if (u, v) not in best or length < best[(u, v)]:
                best[(u, v)] = length
        self.edges = {k: best[k] for k in sorted(best)}

        # successors sorted by node id -> deterministic tie-break
        n = len(self.node_ids)
        self._succ = [[] for _ in range(n)]
        for (u, v), length in self.edges.items():
            self._succ[self._index[u]].append((self._index[v], length))

        rows = [self._index[u] for u, _ in self.edges]
        cols = [self._index[v] for _, v in self.edges]
        graph = csr_matrix((list(self.edges.values()), (rows, cols)), shape=(n, n))
        if n > 1:
            n_comp, _ = connected_components(graph, directed=True, connection="strong")
            if n_comp != 1:
                raise ValidationError(f"network is not strongly connected ({n_comp} components)")
        self._dist = dijkstra(graph, directed=True)
        self._dist.setflags(write=False)
        # plain nested lists are much faster than numpy scalar indexing in hot loops
        self._dist_rows = self._dist.tolist()

    def __len__(self):
        return len(self.node_ids)

    def __contains__(self, node):
        return node in self._index

    @property
    def n_edges(self):
        return len(self.edges)

    def index(self, node):
        try:
            return self._index[node]
        except KeyError:
            raise NodeNotFound(f"unknown node {node}") from None

    def distance(self, a, b) -> float:
        """Shortest-path length in meters."""
        d = self._dist_rows[self.index(a)][self.index(b)]
        if d == np.inf:
            raise Unreachable(f"no path from {a} to {b}")
        return d

    def travel_time(self, a, b) -> float:
        return self.distance(a, b) / self.speed

    def distance_rows(self):
        """Distance matrix as nested lists, indexed by `index(node)`."""
        return self._dist_rows

    def shortest_path(self, a, b) -> Route:
        """Minimal-length route; among equal-length routes the lexicographically
        smallest node sequence wins."""
        ia, ib = self.index(a), self.index(b)
        dist = self._dist_rows
        total = dist[ia][ib]
        if total == np.inf:
            raise Unreachable(f"no path from {a} to {b}")
        seq = [ia]
        length = 0.0
        u = ia
        while u != ib:
            remaining = dist[u][ib]
            tol = 1e-9 * max(1.0, remaining)
            for v, w in self._succ[u]:
                if abs(w + dist[v][ib] - remaining) <= tol:
                    break
            else:  # pragma: no cover - cannot happen with consistent distances
                raise Unreachable(f"path reconstruction failed at {self.node_ids[u]}")
            seq.append(v)
            length += w
            u = v
        return Route(tuple(self.node_ids[i] for i in seq), length, length / self.speed)


def shortest_path(net: Network, origin, destination) -> Route:
    return net.shortest_path(origin, destination)


def make_grid(rows: int, cols: int, edge_len: float, speed: float = DEFAULT_SPEED) -> Network:
    """Bidirectional rows x cols lattice. Node id = r * cols + c, coordinates in meters."""
    if rows < 2 or cols < 2:
        raise ValueError(f"grid needs rows >= 2 and cols >= 2, got {rows}x{cols}")
    if not edge_len > 0:
        raise ValueError(f"edge_len must be positive, got {edge_len}")
    nodes = [(r * cols + c, c * edge_len, r * edge_len) for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            if c + 1 < cols:
                edges += [(n, n + 1, edge_len), (n + 1, n, edge_len)]
            if r + 1 < rows:
                edges += [(n, n + cols, edge_len), (n + cols, n, edge_len)]
    return Network(nodes, edges, speed)


def read_csv_rows(path, header):
    """Yield (line_number, fields) for data rows after checking the header."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError("empty file, header required", path, 1) from None
        if [h.strip() for h in first] != header:
            raise ParseError(f"expected header {','.join(header)}", path, 1)
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, reader.line_num)
            yield reader.line_num, [f.strip() for f in row]


def load_network(nodes_file, edges_file, speed: float = DEFAULT_SPEED) -> Network:
    nodes = []
    for line, (nid, x, y) in read_csv_rows(nodes_file, NODES_HEADER):
        try:
            nodes.append((int(nid), float(x), float(y)))
        except ValueError:
            raise ParseError(f"bad node record {nid!r},{x!r},{y!r}", nodes_file, line) from None
    known = {n for n, _, _ in nodes}
    edges = []
    for line, (u, v, length) in read_csv_rows(edges_file, EDGES_HEADER):
        try:
            rec = (int(u), int(v), float(length))
        except ValueError:
            raise ParseError(f"bad edge record {u!r},{v!r},{length!r}", edges_file, line) from None
        for n in rec[:2]:
            if n not in known:
                raise ParseError(f"edge references unknown node {n}", edges_file, line)
        if not rec[2] > 0:
            raise ParseError(f"edge length must be positive, got {rec[2]}", edges_file, line)
        edges.append(rec)
    return Network(nodes, edges, speed)


def write_network(net: Network, nodes_file, edges_file):
    with open(nodes_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NODES_HEADER)
        for n in net.node_ids:
            x, y = net.coords[n]
            w.writerow([n, repr(x), repr(y)])
    with open(edges_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGES_HEADER)
        for (u, v), length in net.edges.items():
            w.writerow([u, v, repr(length)])
