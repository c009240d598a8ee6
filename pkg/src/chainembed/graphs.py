"""Logical and hardware graph containers, generators, and file I/O.

Logical graphs are plain undirected simple graphs on dense node indices.
Hardware graphs follow the Chimera layout: an M x N grid of complete
bipartite K_{L,L} unit cells, with vertical couplers between left-side
qubits of vertically adjacent cells and horizontal couplers between
right-side qubits of horizontally adjacent cells.

Both graph kinds are immutable after construction and safe to share
across workers.
"""

from __future__ import annotations

import random
from typing import Iterable

import numpy as np
from scipy import sparse

__all__ = [
    "GraphParseError",
    "LogicalGraph",
    "HardwareGraph",
    "generate_chimera",
    "generate_ba",
    "load_graph",
    "load_hardware",
    "save_graph",
    "induced_subgraph",
]


class GraphParseError(ValueError):
    """Raised when a graph file is malformed; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _normalize_edges(node_count: int, edges: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    seen: set[tuple[int, int]] = set()
    for u, v in edges:
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise ValueError(f"edge ({u}, {v}) out of range for {node_count} nodes")
        e = (u, v) if u < v else (v, u)
        if e in seen:
            raise ValueError(f"duplicate edge {e}")
        seen.add(e)
    return tuple(sorted(seen))


def _build_adjacency(node_count: int, edges: Iterable[tuple[int, int]]) -> tuple[tuple[int, ...], ...]:
    adj: list[list[int]] = [[] for _ in range(node_count)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    return tuple(tuple(sorted(a)) for a in adj)


class LogicalGraph:
    """Undirected simple graph on nodes 0 .. node_count-1."""

    __slots__ = ("node_count", "edges", "adj")

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]] = ()):
        if node_count < 0:
            raise ValueError("node_count must be nonnegative")
        self.node_count = node_count
        self.edges = _normalize_edges(node_count, edges)
        self.adj = _build_adjacency(node_count, self.edges)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adj[v]

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogicalGraph):
            return NotImplemented
        return self.node_count == other.node_count and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.node_count, self.edges))

    def __reduce__(self):
        return (LogicalGraph, (self.node_count, self.edges))

    def __repr__(self) -> str:
        return f"LogicalGraph(n={self.node_count}, m={self.edge_count})"


class HardwareGraph:
    """Chimera hardware graph C(rows, cols, shore).

    Node ids are assigned as ``((row * cols + col) * 2 + side) * shore + index``
    with side 0 for the left (vertical) shore and side 1 for the right
    (horizontal) shore, so cell lookup is pure arithmetic.
    """

    __slots__ = (
        "rows",
        "cols",
        "shore",
        "node_count",
        "edges",
        "adj",
        "_sparse",
        "_center_dist",
        "_edge_arrays",
    )

    def __init__(self, rows: int, cols: int, shore: int):
        if rows < 1 or cols < 1 or shore < 1:
            raise ValueError("chimera dimensions must be positive")
        self.rows = rows
        self.cols = cols
        self.shore = shore
        self.node_count = rows * cols * 2 * shore
        self.edges = self._build_edges()
        self.adj = _build_adjacency(self.node_count, self.edges)
        self._sparse = None
        self._center_dist = None
        self._edge_arrays = None

    def node_id(self, row: int, col: int, side: int, index: int) -> int:
        return ((row * self.cols + col) * 2 + side) * self.shore + index

    def cell_of(self, node: int) -> tuple[int, int, int, int]:
        """Return (row, col, side, index) for a node id."""
        index = node % self.shore
        rest = node // self.shore
        side = rest % 2
        cell = rest // 2
        return cell // self.cols, cell % self.cols, side, index

    def _build_edges(self) -> tuple[tuple[int, int], ...]:
        edges: list[tuple[int, int]] = []
        shore = self.shore
        for row in range(self.rows):
            for col in range(self.cols):
                left = self.node_id(row, col, 0, 0)
                right = self.node_id(row, col, 1, 0)
                for i in range(shore):
                    for j in range(shore):
                        edges.append((left + i, right + j))
                if row + 1 < self.rows:
                    below = self.node_id(row + 1, col, 0, 0)
                    for i in range(shore):
                        edges.append((left + i, below + i))
                if col + 1 < self.cols:
                    beside = self.node_id(row, col + 1, 1, 0)
                    for i in range(shore):
                        edges.append((right + i, beside + i))
        return tuple(sorted((u, v) if u < v else (v, u) for u, v in edges))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def center_distance(self) -> np.ndarray:
        """Per-node grid distance (in cells, doubled) from the chip center."""
        if self._center_dist is None:
            ids = np.arange(self.node_count)
            cells = ids // (2 * self.shore)
            rows = cells // self.cols
            cols = cells % self.cols
            self._center_dist = (
                np.abs(2 * rows - (self.rows - 1)) + np.abs(2 * cols - (self.cols - 1))
            ).astype(np.int64)
        return self._center_dist

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Both directions of every edge as parallel (row, col) arrays (cached)."""
        if self._edge_arrays is None:
            rows = np.fromiter((u for u, v in self.edges), dtype=np.int32, count=len(self.edges))
            cols = np.fromiter((v for u, v in self.edges), dtype=np.int32, count=len(self.edges))
            self._edge_arrays = (
                np.concatenate([rows, cols]),
                np.concatenate([cols, rows]),
            )
        return self._edge_arrays

    def sparse_adj(self) -> sparse.csr_matrix:
        """Symmetric adjacency as a float32 CSR matrix (cached)."""
        if self._sparse is None:
            rows = np.fromiter((u for u, v in self.edges), dtype=np.int32, count=len(self.edges))
            cols = np.fromiter((v for u, v in self.edges), dtype=np.int32, count=len(self.edges))
            data = np.ones(len(self.edges), dtype=np.float32)
            m = sparse.coo_matrix(
                (np.concatenate([data, data]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
                shape=(self.node_count, self.node_count),
            )
            self._sparse = m.tocsr()
        return self._sparse

    def __eq__(self, other) -> bool:
        if not isinstance(other, HardwareGraph):
            return NotImplemented
        return (self.rows, self.cols, self.shore) == (other.rows, other.cols, other.shore)

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.shore))

    def __reduce__(self):
        return (HardwareGraph, (self.rows, self.cols, self.shore))

    def __repr__(self) -> str:
        return f"HardwareGraph(C({self.rows},{self.cols},{self.shore}))"


def generate_chimera(m: int, n: int, l: int = 4) -> HardwareGraph:
    """Generate the Chimera graph C(m, n, l); deterministic node numbering."""
    return HardwareGraph(m, n, l)


def generate_ba(n: int, d: int, seed: int = 0) -> LogicalGraph:
    """Grow a connected Barabasi-Albert graph by preferential attachment.

    Starts from a single connected pair; each subsequent node attaches
    min(d, existing) edges to distinct nodes sampled with probability
    proportional to current degree. Bit-reproducible for a fixed seed.
    """
    if d < 1:
        raise ValueError("attachment degree d must be >= 1")
    if d >= n:
        raise ValueError(f"attachment degree d={d} must be smaller than n={n}")
    rng = random.Random(seed)
    edges: list[tuple[int, int]] = [(0, 1)]
    # One entry per unit of degree; sampling from it is preferential attachment.
    repeated: list[int] = [0, 1]
    for new in range(2, n):
        k = min(d, new)
        targets: set[int] = set()
        while len(targets) < k:
            targets.add(repeated[rng.randrange(len(repeated))])
        for t in sorted(targets):
            edges.append((t, new))
            repeated.append(t)
        repeated.extend([new] * k)
    return LogicalGraph(n, edges)


def induced_subgraph(graph: LogicalGraph, nodes: Iterable[int]) -> LogicalGraph:
    """Subgraph on ``nodes`` with exactly the internal edges, relabeled densely.

    Nodes are relabeled by ascending original index.
    """
    keep = sorted(set(nodes))
    for v in keep:
        if not (0 <= v < graph.node_count):
            raise ValueError(f"node {v} not in graph")
    index = {v: i for i, v in enumerate(keep)}
    edges = [(index[u], index[v]) for u, v in graph.edges if u in index and v in index]
    return LogicalGraph(len(keep), edges)


def save_graph(graph: LogicalGraph | HardwareGraph, path) -> None:
    """Write a graph file: optional ``c chimera M N L`` header, then ``p``/``e`` lines."""
    with open(path, "w", encoding="utf-8") as fp:
        if isinstance(graph, HardwareGraph):
            fp.write(f"c chimera {graph.rows} {graph.cols} {graph.shore}\n")
        fp.write(f"p {graph.node_count} {graph.edge_count}\n")
        for u, v in graph.edges:
            fp.write(f"e {u} {v}\n")


def _parse_graph_lines(path) -> tuple[tuple[int, int, int] | None, int, list[tuple[int, int]]]:
    chimera = None
    node_count = None
    declared_edges = None
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "c":
                if node_count is not None:
                    raise GraphParseError(line_no, "chimera header must precede the p line")
                if len(parts) != 5 or parts[1] != "chimera":
                    raise GraphParseError(line_no, f"malformed chimera header: {line!r}")
                try:
                    chimera = (int(parts[2]), int(parts[3]), int(parts[4]))
                except ValueError:
                    raise GraphParseError(line_no, f"non-integer chimera dimensions: {line!r}") from None
            elif tag == "p":
                if node_count is not None:
                    raise GraphParseError(line_no, "duplicate p line")
                if len(parts) != 3:
                    raise GraphParseError(line_no, f"malformed header: {line!r}")
                try:
                    node_count, declared_edges = int(parts[1]), int(parts[2])
                except ValueError:
                    raise GraphParseError(line_no, f"non-integer header fields: {line!r}") from None
                if node_count < 0 or declared_edges < 0:
                    raise GraphParseError(line_no, "negative counts in header")
            elif tag == "e":
                if node_count is None:
                    raise GraphParseError(line_no, "edge before p header")
                if len(parts) != 3:
                    raise GraphParseError(line_no, f"malformed edge line: {line!r}")
                try:
                    u, v = int(parts[1]), int(parts[2])
                except ValueError:
                    raise GraphParseError(line_no, f"non-integer edge endpoints: {line!r}") from None
                if u == v:
                    raise GraphParseError(line_no, f"self-loop at node {u}")
                if not (0 <= u < node_count and 0 <= v < node_count):
                    raise GraphParseError(line_no, f"edge ({u}, {v}) out of range for {node_count} nodes")
                e = (u, v) if u < v else (v, u)
                if e in seen:
                    raise GraphParseError(line_no, f"duplicate edge {e}")
                seen.add(e)
                edges.append(e)
            else:
                raise GraphParseError(line_no, f"unknown line tag {tag!r}")
    if node_count is None:
        raise GraphParseError(0, "missing p header")
    if declared_edges != len(edges):
        raise GraphParseError(0, f"header declares {declared_edges} edges, file has {len(edges)}")
    return chimera, node_count, edges


def load_graph(path) -> LogicalGraph:
    """Load an edge-list graph file as a LogicalGraph."""
    _, node_count, edges = _parse_graph_lines(path)
    return LogicalGraph(node_count, edges)


def load_hardware(path) -> HardwareGraph:
    """Load a graph file carrying a chimera header; checks the stored edge set."""
    chimera, node_count, edges = _parse_graph_lines(path)
    if chimera is None:
        raise GraphParseError(0, "file has no chimera header")
    hw = HardwareGraph(*chimera)
    if hw.node_count != node_count or hw.edges != tuple(sorted(edges)):
        raise GraphParseError(0, "stored edges do not match the declared chimera topology")
    return hw
