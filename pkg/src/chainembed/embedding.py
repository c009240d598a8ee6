"""Chain embeddings: validation, clean paths, node embedding, state transitions.

An embedding maps each logical node to a chain, a set of hardware qubits
that must induce a connected subgraph. A feasible embedding satisfies
three constraints on the embedded scope:

1. chain connection: every chain induces a connected hardware subgraph;
2. global connection: every logical edge has at least one hardware edge
   between the two chains;
3. one-to-many: chains are pairwise disjoint.

Nodes are embedded one at a time. For a node with already-embedded
neighbors, the new chain is built from clean paths: hardware paths whose
interior is free and whose endpoint lands in a neighbor's chain. All
paths share a single root qubit, and the new chain is the root plus the
free path interiors. When no root can reach every embedded neighbor (the
isolated problem), existing chains are grown over free qubits until the
node becomes embeddable or the hardware is exhausted.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .graphs import HardwareGraph, LogicalGraph

__all__ = [
    "HardwareExhausted",
    "Embedding",
    "CleanPath",
    "ChainPlan",
    "Violation",
    "ValidationReport",
    "TransitionInfo",
    "validate",
    "shortest_clean_path",
    "qubit_gain",
    "node_embedding",
    "topology_adapting",
    "state_transition",
    "state_transition_info",
    "embed_with_order",
    "EmbedTimeout",
    "write_embedding",
    "read_embedding",
]

INF = 1 << 20


class HardwareExhausted(RuntimeError):
    """No chain can absorb a free qubit: the hardware graph is used up."""


class EmbedTimeout(RuntimeError):
    """Raised when an embedding run exceeds its deadline."""


class Embedding:
    """One-to-many map from logical nodes to pairwise disjoint hardware chains.

    ``chains`` maps a logical node to its chain in insertion order;
    ``reverse`` maps an occupied hardware node back to its owner. The two
    views are kept consistent at all times, so the total size equals the
    number of occupied hardware nodes.
    """

    __slots__ = ("chains", "reverse")

    def __init__(self, chains: Mapping[int, Iterable[int]] | None = None):
        self.chains: dict[int, list[int]] = {}
        self.reverse: dict[int, int] = {}
        if chains:
            for v in sorted(chains):
                self.assign(v, chains[v])

    @property
    def size(self) -> int:
        return len(self.reverse)

    def embedded(self) -> set[int]:
        return set(self.chains)

    def chain(self, v: int) -> tuple[int, ...]:
        return tuple(self.chains.get(v, ()))

    def owner(self, u: int) -> int | None:
        return self.reverse.get(u)

    def is_free(self, u: int) -> bool:
        return u not in self.reverse

    def assign(self, v: int, nodes: Iterable[int]) -> None:
        if v in self.chains:
            raise ValueError(f"logical node {v} already has a chain")
        chain: list[int] = []
        for u in nodes:
            holder = self.reverse.get(u)
            if holder is not None:
                raise ValueError(f"hardware node {u} already owned by {holder}")
            self.reverse[u] = v
            chain.append(u)
        if not chain:
            raise ValueError("cannot assign an empty chain")
        self.chains[v] = chain

    def extend(self, v: int, u: int) -> None:
        holder = self.reverse.get(u)
        if holder is not None:
            raise ValueError(f"hardware node {u} already owned by {holder}")
        self.chains[v].append(u)
        self.reverse[u] = v

    def copy(self) -> "Embedding":
        out = Embedding()
        out.chains = {v: list(c) for v, c in self.chains.items()}
        out.reverse = dict(self.reverse)
        return out

    def occupied_mask(self, node_count: int) -> np.ndarray:
        mask = np.zeros(node_count, dtype=bool)
        if self.reverse:
            mask[list(self.reverse)] = True
        return mask

    def __eq__(self, other) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return {v: set(c) for v, c in self.chains.items()} == {v: set(c) for v, c in other.chains.items()}

    def __repr__(self) -> str:
        return f"Embedding(nodes={len(self.chains)}, qubits={self.size})"


@dataclass(frozen=True)
class CleanPath:
    """Hardware path whose interior is free and whose last node is embedded."""

    nodes: tuple[int, ...]
    owner: int


@dataclass(frozen=True)
class Violation:
    kind: str  # chain-connection | global-connection | one-to-many
    detail: tuple

    def __str__(self) -> str:
        return f"{self.kind}: {' '.join(str(x) for x in self.detail)}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def feasible(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        return [str(v) for v in self.violations]

    def __str__(self) -> str:
        if self.feasible:
            return "feasible"
        return "\n".join(self.lines())


def _as_chain_dict(phi: "Embedding | Mapping[int, Iterable[int]]") -> dict[int, list[int]]:
    if isinstance(phi, Embedding):
        return {v: list(c) for v, c in phi.chains.items()}
    return {v: list(c) for v, c in phi.items()}


def validate(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: "Embedding | Mapping[int, Iterable[int]]",
    scope: Iterable[int],
) -> ValidationReport:
    """Check the three embedding constraints on the subgraph induced by ``scope``.

    Accepts a raw chain mapping as well, so corrupted files can be
    diagnosed. All violations are collected, not just the first.
    """
    chains = _as_chain_dict(phi)
    scope_set = set(scope)
    violations: list[Violation] = []

    holder: dict[int, int] = {}
    overlap_reported: set[tuple[int, int]] = set()
    for v in sorted(scope_set):
        for u in chains.get(v, ()):  # one-to-many
            if u in holder and holder[u] != v:
                pair = tuple(sorted((holder[u], v)))
                if (u, *pair) not in overlap_reported:
                    violations.append(Violation("one-to-many", (u, pair[0], pair[1])))
                    overlap_reported.add((u, *pair))
            else:
                holder[u] = v

    for v in sorted(scope_set):  # chain connection
        chain = chains.get(v, [])
        if not chain:
            violations.append(Violation("chain-connection", (v, "empty-chain")))
            continue
        bad = [u for u in chain if not (0 <= u < hardware.node_count)]
        if bad:
            violations.append(Violation("chain-connection", (v, "invalid-node", bad[0])))
            continue
        members = set(chain)
        seen = {chain[0]}
        queue = deque([chain[0]])
        while queue:
            x = queue.popleft()
            for y in hardware.adj[x]:
                if y in members and y not in seen:
                    seen.add(y)
                    queue.append(y)
        if len(seen) != len(members):
            violations.append(Violation("chain-connection", (v, "disconnected")))

    for u, v in logical.edges:  # global connection
        if u not in scope_set or v not in scope_set:
            continue
        cu, cv = chains.get(u, []), chains.get(v, [])
        if not cu or not cv:
            continue  # already reported as a chain-connection violation
        if len(cu) > len(cv):
            cu, cv = cv, cu
        other = set(cv)
        if not any(y in other for x in cu for y in hardware.adj[x]):
            violations.append(Violation("global-connection", (u, v)))

    return ValidationReport(tuple(violations))


def chain_distances(
    hardware: HardwareGraph,
    occupied: np.ndarray,
    chains: list[Iterable[int]],
) -> np.ndarray:
    """Distances from each chain to every hardware node through free interiors.

    Returns an int32 array of shape (node_count, len(chains)). Column j
    holds, for each free node u, the minimum number of edges on a path
    from u to chain j whose intermediate nodes are all free; chain nodes
    hold 0 and unreachable nodes hold INF. One level-synchronous BFS pass
    covers all chains at once.
    """
    n = hardware.node_count
    k = len(chains)
    dist = np.full((n, k), INF, dtype=np.int32)
    if k == 0:
        return dist
    active = np.zeros((n, k), dtype=np.float32)
    for j, chain in enumerate(chains):
        idx = np.fromiter(chain, dtype=np.int64)
        active[idx, j] = 1.0
        dist[idx, j] = 0
    adj = hardware.sparse_adj()
    free = ~occupied
    unseen = dist == INF
    level = 0
    while True:
        reached = adj.dot(active) > 0.5
        new = reached & unseen & free[:, None]
        if not new.any():
            break
        level += 1
        dist[new] = level
        unseen &= ~new
        active = new.astype(np.float32)
    return dist


def _walk_clean_path(
    hardware: HardwareGraph,
    dist_col: np.ndarray,
    root: int,
    chain: Iterable[int],
    owner: int,
    free_degree: "np.ndarray | None" = None,
    avoid: "set[int] | None" = None,
) -> CleanPath | None:
    """Reconstruct a shortest clean path from ``root`` into ``chain``.

    Among shortest continuations the walk stays on the current wire (same
    shore side and index) when it can, then prefers open nodes, then the
    smallest id. Straight paths burn one wire instead of nicking many,
    which keeps the rest of the chip routable. Nodes in ``avoid`` are
    skipped; returns None when they block every continuation.
    """
    members = set(chain)
    path = [root]
    current = root
    d = int(dist_col[root])
    shore = hardware.shore
    while d > 1:
        options = [
            y
            for y in hardware.adj[current]
            if dist_col[y] == d - 1 and (avoid is None or y not in avoid)
        ]
        if not options:
            return None
        if len(options) > 1:
            wire = (current // shore % 2, current % shore)
            current = min(
                options,
                key=lambda y: (
                    (y // shore % 2, y % shore) != wire,
                    -(int(free_degree[y]) if free_degree is not None else 0),
                    y,
                ),
            )
        else:
            current = options[0]
        path.append(current)
        d -= 1
    terminal = min(y for y in hardware.adj[current] if y in members)
    path.append(terminal)
    return CleanPath(tuple(path), owner)


def shortest_clean_path(
    hardware: HardwareGraph,
    phi: Embedding,
    root: int,
    target: int,
) -> CleanPath | None:
    """Shortest path from a free root into the target's chain with free interior.

    Among equal-length paths the lexicographically smallest node sequence
    wins. Returns None when the chain is empty or unreachable.
    """
    if not phi.is_free(root):
        raise ValueError(f"root {root} is occupied")
    chain = phi.chain(target)
    if not chain:
        return None
    occupied = phi.occupied_mask(hardware.node_count)
    dist = chain_distances(hardware, occupied, [chain])[:, 0]
    if dist[root] >= INF:
        return None
    path = _walk_clean_path(hardware, dist, root, chain, target)
    assert path is not None
    return path


@dataclass(frozen=True)
class ChainPlan:
    """Planned placement for one logical node at the current state.

    ``gain`` counts the shared root plus every path tail including its
    embedded terminal. The newly occupied qubits are split between the
    new node's own ``chain`` (the root plus the near half of every clean
    path) and ``extensions`` growing each terminal's chain by the far
    half, so chains serving much traffic keep gaining free boundary.
    """

    node: int
    root: int
    gain: int
    chain: tuple[int, ...]
    extensions: tuple[tuple[int, tuple[int, ...]], ...]
    paths: tuple[CleanPath, ...]

    @property
    def cost(self) -> int:
        return len(self.chain) + sum(len(ext) for _, ext in self.extensions)

    def delta(self) -> dict[int, list[int]]:
        out = {self.node: list(self.chain)}
        for w, ext in self.extensions:
            if ext:
                out[w] = list(ext)
        return out


class PlanContext:
    """Shared scratch for planning chains of several nodes at one state.

    Computes chain-distance columns for all requested neighbor chains in
    a single batched BFS and reuses them across nodes. Nodes in
    ``blocked`` are treated as unusable for roots and path interiors even
    though they are free.
    """

    def __init__(
        self,
        logical: LogicalGraph,
        hardware: HardwareGraph,
        phi: Embedding,
        blocked: "set[int] | None" = None,
    ):
        self.logical = logical
        self.hardware = hardware
        self.phi = phi
        self.occupied = phi.occupied_mask(hardware.node_count)
        if blocked:
            self.occupied[list(blocked)] = True
        self.free = ~self.occupied
        self._dist: np.ndarray | None = None
        self._col: dict[int, int] = {}
        self._free_degree: np.ndarray | None = None

    def prepare(self, nodes: Iterable[int]) -> None:
        """Batch-compute distance columns for all embedded neighbors of ``nodes``."""
        owners = sorted(
            {w for v in nodes for w in self.logical.adj[v] if w in self.phi.chains} - set(self._col)
        )
        if not owners:
            return
        dist = chain_distances(self.hardware, self.occupied, [self.phi.chains[w] for w in owners])
        base = len(self._col)
        for j, w in enumerate(owners):
            self._col[w] = base + j
        self._dist = dist if self._dist is None else np.hstack([self._dist, dist])

    def free_degree(self) -> np.ndarray:
        if self._free_degree is None:
            counts = self.hardware.sparse_adj().dot(self.free.astype(np.float32))
            self._free_degree = counts.astype(np.int32)
        return self._free_degree

    def gain_and_root(self, v: int) -> tuple[int, int] | None:
        """Minimum clean-path union size for ``v`` and its root; None if isolated.

        Roots minimize the combined clean-path length; ties fall to the
        root with the most free neighbors, then the smallest id. Packing
        chains toward open space keeps later placements from walling
        anything in.
        """
        owners = [w for w in self.logical.adj[v] if w in self.phi.chains]
        if not owners:
            # No embedded neighbors: take a free qubit with the most free
            # neighbors, closest to the hardware center among those.
            if not self.free.any():
                return None
            fdeg = self.free_degree().astype(np.int64)
            key = np.where(self.free, fdeg * 4096 - self.hardware.center_distance(), -1)
            return 1, int(np.argmax(key))
        if self._dist is None or any(w not in self._col for w in owners):
            self.prepare([v])
        cols = [self._col[w] for w in owners]
        sub = self._dist[:, cols]
        valid = self.free & (sub < INF).all(axis=1)
        if not valid.any():
            return None
        totals = sub.sum(axis=1, dtype=np.int64)
        max_degree = self.hardware.shore + 2
        key = totals * (max_degree + 1) + (max_degree - self.free_degree())
        key[~valid] = np.iinfo(np.int64).max
        root = int(np.argmin(key))
        return 1 + int(totals[root]), root

    def consumption(self, v: int) -> int | None:
        """New qubits a transition would charge for ``v`` before any rerouting."""
        result = self.gain_and_root(v)
        if result is None:
            return None
        gain, _ = result
        embedded_neighbors = sum(1 for w in self.logical.adj[v] if w in self.phi.chains)
        return gain - embedded_neighbors

    def _reroute(
        self,
        chain: list[int],
        owner: int,
        root: int,
        avoid: set[int],
        fdeg: np.ndarray,
    ) -> CleanPath | None:
        blocked = self.occupied.copy()
        blocked[list(avoid - {root})] = True
        redo = chain_distances(self.hardware, blocked, [chain])[:, 0]
        if redo[root] >= INF:
            return None
        return _walk_clean_path(self.hardware, redo, root, chain, owner, fdeg)

    def plan(self, v: int) -> ChainPlan | None:
        """Plan the placement of unembedded node ``v``; None if isolated.

        Clean paths to the neighbors' chains are built one at a time,
        vertex-disjoint except for the shared root; a path blocked by an
        earlier one is rerouted around it. Every path's interior is split
        in half: the near half joins the new chain, the far half extends
        the terminal's chain.
        """
        result = self.gain_and_root(v)
        if result is None:
            return None
        gain, root = result
        owners = [w for w in self.logical.adj[v] if w in self.phi.chains]
        if not owners:
            return ChainPlan(v, root, 1, (root,), (), ())
        fdeg = self.free_degree()
        boundaries = {w: _free_boundary(self.hardware, self.phi, self.phi.chains[w]) for w in owners}
        # Serve the chains with the scarcest access first, and keep paths
        # off the pending targets' boundary nodes whenever possible. Paths
        # may travel through nodes already claimed for the new chain (they
        # were free when the distances were taken), but not through nodes
        # donated to other chains.
        owners.sort(key=lambda w: (len(boundaries[w]), w))
        own: list[int] = [root]
        own_set: set[int] = {root}
        donated: set[int] = set()
        extensions: list[tuple[int, tuple[int, ...]]] = []
        paths: list[CleanPath] = []
        for i, w in enumerate(owners):
            chain = self.phi.chains[w]
            pending: set[int] = set()
            for later in owners[i + 1 :]:
                pending |= boundaries[later]
            pending -= boundaries[w]
            pending -= own_set
            dist_col = self._dist[:, self._col[w]]
            path = _walk_clean_path(self.hardware, dist_col, root, chain, w, fdeg, avoid=donated | pending)
            if path is None:
                # The shortest route is blocked; try a detour that still
                # respects the pending boundaries, then give those up too.
                path = self._reroute(chain, w, root, donated | pending, fdeg)
            if path is None:
                path = _walk_clean_path(self.hardware, dist_col, root, chain, w, fdeg, avoid=donated)
            if path is None:
                path = self._reroute(chain, w, root, donated, fdeg)
            if path is None:
                return None
            interiors = list(path.nodes[1:-1])
            # Fresh nodes before the final unclaimed run stitch into the new
            # chain; the final run is split, its far half extending ``w``.
            last_claimed = 0
            for k, u in enumerate(interiors):
                if u in own_set:
                    last_claimed = k + 1
            for u in interiors[:last_claimed]:
                if u not in own_set:
                    own_set.add(u)
                    own.append(u)
            tail = [u for u in interiors[last_claimed:]]
            # Chains that still have other edges to realize take the far
            # half of the tail, gaining fresh boundary; finished chains
            # leave everything to the new node.
            if any(x != v and x not in self.phi.chains for x in self.logical.adj[w]):
                half = len(tail) // 2
            else:
                half = len(tail)
            for u in tail[:half]:
                own_set.add(u)
                own.append(u)
            donated.update(tail[half:])
            extensions.append((w, tuple(tail[half:])))
            paths.append(path)
        extensions.sort()
        return ChainPlan(v, root, gain, tuple(own), tuple(extensions), tuple(paths))


def qubit_gain(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
    v: int,
) -> tuple[int, int, tuple[CleanPath, ...]] | None:
    """Minimum clean-path union size for embedding ``v``, with root and paths.

    The union counts the shared root once plus the remaining nodes of
    each selected path, terminals included. Roots tie-break by smallest
    union, then smallest id. Returns None when some embedded neighbor is
    unreachable from every free root.
    """
    if v in phi.chains:
        raise ValueError(f"node {v} is already embedded")
    ctx = PlanContext(logical, hardware, phi)
    plan = ctx.plan(v)
    if plan is None:
        return None
    return plan.gain, plan.root, plan.paths


def node_embedding(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
    embedded: set[int],
    a: int,
    blocked: "set[int] | None" = None,
) -> dict[int, list[int]]:
    """Embedding delta that makes the combination feasible; {} if isolated.

    The delta holds the new chain for ``a`` plus the far-half path
    extensions of the neighbor chains it connects to.
    """
    if a in embedded or a in phi.chains:
        raise ValueError(f"node {a} is already embedded")
    ctx = PlanContext(logical, hardware, phi, blocked)
    plan = ctx.plan(a)
    if plan is None:
        return {}
    return plan.delta()


def topology_adapting(
    hardware: HardwareGraph,
    phi: Embedding,
    logical: "LogicalGraph | None" = None,
    targets: "Iterable[int] | None" = None,
) -> Embedding:
    """Grow chains by one adjacent free qubit each; chains with none are skipped.

    By default every chain grows: thinnest free boundary first, absorbing
    the neighbor that continues one of the chain's wires, then the one
    with the most free neighbors, then the smallest id. When the logical
    graph is supplied, absorptions that would cut off a chain with
    unserved edges (the victim's last free neighbor, or a dead end for
    the absorber itself) are skipped in favor of the next candidate.

    With ``targets``, growth is directed instead: the target chains step
    along their shortest free routes toward a meeting point that a future
    placement could root at. Raises HardwareExhausted when nothing can
    grow.
    """
    grown = phi.copy()
    shore = hardware.shore

    def continues_wire(v: int, y: int) -> bool:
        # y extends one of the chain's wires through an inter-cell coupler.
        wire = (y // shore % 2, y % shore)
        cell = y // (2 * shore)
        for z in hardware.adj[y]:
            if grown.reverse.get(z) == v and (z // shore % 2, z % shore) == wire and z // (2 * shore) != cell:
                return True
        return False

    def absorb_allowed(v: int, y: int, careful: bool) -> bool:
        if logical is None:
            return True
        for z in hardware.adj[y]:
            w = grown.reverse.get(z)
            if w is None or w == v or not _demand_positive(logical, grown, w, None):
                continue
            if _free_boundary(hardware, grown, grown.chains[w]) <= {y}:
                return False
        if _demand_positive(logical, grown, v, None):
            gained = {z for z in hardware.adj[y] if grown.is_free(z)} - {y}
            if not gained and _free_boundary(hardware, grown, grown.chains[v]) <= {y}:
                return False
        if careful:
            grown.extend(v, y)
            divided = bool(_component_deficit(logical, hardware, grown))
            grown.chains[v].pop()
            del grown.reverse[y]
            if divided:
                return False
        return True

    def grow_flood(careful: bool) -> int:
        absorbed = 0
        order = sorted(grown.chains, key=lambda v: (len(_free_boundary(hardware, grown, grown.chains[v])), v))
        for v in order:
            candidates = sorted(
                _free_boundary(hardware, grown, grown.chains[v]),
                key=lambda y: (
                    not continues_wire(v, y),
                    -sum(1 for z in hardware.adj[y] if grown.is_free(z)),
                    y,
                ),
            )
            for y in candidates:
                if absorb_allowed(v, y, careful):
                    grown.extend(v, y)
                    absorbed += 1
                    break
        return absorbed

    def grow_directed(wanted: list[int], careful: bool) -> int:
        occupied = grown.occupied_mask(hardware.node_count)
        free = ~occupied
        if not free.any():
            return 0
        dist = chain_distances(hardware, occupied, [grown.chains[w] for w in wanted])
        reachable = (dist < INF).sum(axis=1)
        totals = np.where(dist < INF, dist, 64).sum(axis=1)
        fdeg = hardware.sparse_adj().dot(free.astype(np.float32)).astype(np.int64)
        key = -reachable.astype(np.int64) * (1 << 40) + totals.astype(np.int64) * 8 + (shore + 2 - fdeg)
        key[~free] = np.iinfo(np.int64).max
        meet = int(np.argmin(key))
        toward = chain_distances(hardware, occupied, [[meet]])[:, 0]
        absorbed = 0
        for j, w in enumerate(wanted):
            if dist[meet, j] <= 1:
                continue  # already adjacent to the meeting point
            candidates = sorted(
                _free_boundary(hardware, grown, grown.chains[w]) - {meet},
                key=lambda y: (int(toward[y]), -sum(1 for z in hardware.adj[y] if grown.is_free(z)), y),
            )
            for y in candidates:
                if toward[y] < INF and absorb_allowed(w, y, careful):
                    grown.extend(w, y)
                    absorbed += 1
                    break
        return absorbed

    def one_round(careful: bool) -> int:
        if targets is not None and logical is not None:
            wanted = sorted(set(targets) & set(grown.chains))
            if wanted:
                absorbed = grow_directed(wanted, careful)
                if absorbed:
                    return absorbed
        return grow_flood(careful)

    snapshot = grown.copy() if logical is not None else None
    base_deficit = _component_deficit(logical, hardware, grown) if logical is not None else set()
    absorbed = one_round(careful=False)
    if (
        absorbed
        and logical is not None
        and _component_deficit(logical, hardware, grown) - base_deficit
    ):
        # The cheap round walled off part of the free space; redo it with
        # the connectivity check on every absorption.
        grown = snapshot
        absorbed = one_round(careful=True)
    if absorbed == 0:
        absorbed = grow_flood(careful=False)
        if absorbed == 0:
            raise HardwareExhausted(f"no chain can grow beyond {grown.size} occupied qubits")
    return grown


def _free_boundary(
    hardware: HardwareGraph,
    phi: Embedding,
    nodes: Iterable[int],
    taken: "set[int] | None" = None,
) -> set[int]:
    out: set[int] = set()
    for u in nodes:
        for y in hardware.adj[u]:
            if phi.is_free(y) and (taken is None or y not in taken):
                out.add(y)
    return out


def _demand_positive(logical: LogicalGraph, phi: Embedding, w: int, a: int | None) -> bool:
    """Does chain ``w`` still have unembedded logical neighbors besides ``a``?"""
    return any(x != a and x not in phi.chains for x in logical.adj[w])


def _free_component_labels(hardware: HardwareGraph, phi: Embedding) -> np.ndarray:
    """Connected-component label per free hardware node (-1 when occupied)."""
    from scipy import sparse
    from scipy.sparse import csgraph

    free = ~phi.occupied_mask(hardware.node_count)
    rows, cols = hardware.edge_arrays()
    keep = free[rows] & free[cols]
    sub = sparse.csr_matrix(
        (np.ones(int(keep.sum()), dtype=np.int8), (rows[keep], cols[keep])),
        shape=(hardware.node_count, hardware.node_count),
    )
    _, labels = csgraph.connected_components(sub, directed=False)
    labels = labels.astype(np.int64)
    labels[~free] = -1
    return labels


def _component_deficit(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
    labels: "np.ndarray | None" = None,
) -> set[int]:
    """Chains with unserved edges that no single free region can serve.

    All such chains must border one common free component, or some future
    node can never reach all of its neighbors from a single root. Returns
    the smallest set of chains left out by the best component (empty when
    one component covers everything); chains with no free neighbor at all
    are always included.
    """
    needy: dict[int, set[int]] = {}
    cut_off: set[int] = set()
    for w, nodes in phi.chains.items():
        if not _demand_positive(logical, phi, w, None):
            continue
        boundary = _free_boundary(hardware, phi, nodes)
        if boundary:
            needy[w] = boundary
        else:
            cut_off.add(w)
    if len(needy) <= 1:
        return cut_off
    if labels is None:
        labels = _free_component_labels(hardware, phi)
    comps: dict[int, set[int]] = {}
    for w, boundary in needy.items():
        comps[w] = {int(labels[y]) for y in boundary}
    candidates = set.union(*comps.values())
    best = min(
        (frozenset(w for w in needy if c not in comps[w]) for c in sorted(candidates)),
        key=lambda s: (len(s), sorted(s)),
    )
    return cut_off | set(best)


@dataclass(frozen=True)
class TransitionInfo:
    """How a transition unfolded.

    A step is an expansion embedding when it either ran adaptation rounds
    or extended existing chains while splitting its clean paths; ``grew``
    lists the chains extended by the split.
    """

    adapt_rounds: int
    new_chain: tuple[int, ...]
    grew: tuple[int, ...] = ()

    @property
    def expanded(self) -> bool:
        return self.adapt_rounds > 0 or bool(self.grew)


_EMPTY: set[int] = set()


def _apply_plan(phi: Embedding, plan: ChainPlan) -> tuple[Embedding, tuple[int, ...]]:
    nxt = phi.copy()
    nxt.assign(plan.node, plan.chain)
    grew = []
    for w, ext in plan.extensions:
        for u in ext:
            nxt.extend(w, u)
        if ext:
            grew.append(w)
    return nxt, tuple(sorted(grew))


def _newly_walled(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    pre: Embedding,
    post: Embedding,
    a: int,
) -> list[int]:
    """Chains with unserved edges that the step would leave without free access."""
    walled = []
    for w, nodes in post.chains.items():
        if not _demand_positive(logical, post, w, None):
            continue
        if _free_boundary(hardware, post, nodes):
            continue
        if w != a and not _free_boundary(hardware, pre, pre.chains[w]):
            continue  # already cut off before this step
        walled.append(w)
    return walled


def _plan_transition(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
    a: int,
) -> tuple["tuple[Embedding, tuple[int, ...]] | None", set[int], "tuple[Embedding, tuple[int, ...]] | None"]:
    """Find a placement for ``a`` that cuts off no chain with unserved edges.

    A candidate that would consume the whole free boundary of such a
    chain is retried with that boundary off limits; if no safe placement
    exists the caller must expand the topology. Returns the applied
    outcome, the chains an expansion should grow, and a fallback outcome
    that merely splits the free space without walling anything (division
    can still work out when the divided chains' remaining edges root
    inside their own region, so it beats exhausting the hardware).
    """
    neighbors = {w for w in logical.adj[a] if w in phi.chains}
    base_deficit = _component_deficit(logical, hardware, phi)
    blocked: set[int] = set()
    fallback: "tuple[Embedding, tuple[int, ...]] | None" = None
    for attempt in range(4):
        plan = PlanContext(logical, hardware, phi, blocked).plan(a)
        if plan is None:
            break
        outcome, grew = _apply_plan(phi, plan)
        walled = set(_newly_walled(logical, hardware, phi, outcome, a))
        divided = _component_deficit(logical, hardware, outcome) - base_deficit
        if not walled and not divided:
            return (outcome, grew), set(), None
        if not walled and fallback is None:
            fallback = (outcome, grew)
        interference: set[int] = set()
        for w in walled | divided:
            if w != a and w in phi.chains:
                interference |= _free_boundary(hardware, phi, phi.chains[w])
        if attempt >= 1:
            # Keep a node of clearance around the endangered chains so the
            # next route cannot seal them in.
            interference |= {z for y in interference for z in hardware.adj[y] if phi.is_free(z)}
        if not (interference - blocked):
            return None, neighbors | ((walled | divided) & set(phi.chains)), fallback
        blocked |= interference
    return None, neighbors, fallback


def state_transition_info(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
    a: int,
) -> tuple[Embedding, TransitionInfo]:
    """state_transition plus what the step did to existing chains."""
    current = phi
    rounds = 0
    while True:
        result, grow, fallback = _plan_transition(logical, hardware, current, a)
        if result is not None:
            outcome, grew = result
            return outcome, TransitionInfo(rounds, outcome.chain(a), grew)
        if fallback is not None and rounds >= 6:
            # Expansion is not opening the squeeze; settling for a free
            # space split gives the episode a chance instead of certain
            # exhaustion.
            outcome, grew = fallback
            return outcome, TransitionInfo(rounds, outcome.chain(a), grew)
        # Directed growth pulls the blocking chains toward a common root;
        # every third round widens everything in case the squeeze is
        # elsewhere.
        targets = grow if rounds % 3 < 2 and grow else None
        current = topology_adapting(hardware, current, logical, targets)
        rounds += 1


def state_transition(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
    a: int,
) -> Embedding:
    """Embed ``a`` on top of ``phi``, adapting the topology when isolated.

    Pure: returns a fresh embedding, the input is never mutated. The
    result is feasible for the embedded scope plus ``a`` whenever the
    input was feasible for its scope.
    """
    nxt, _ = state_transition_info(logical, hardware, phi, a)
    return nxt


def embed_with_order(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    order: Iterable[int],
    deadline: float | None = None,
) -> tuple[Embedding, int]:
    """Run one state transition per node of ``order``; returns (embedding, score).

    The score is the total number of occupied qubits. An optional
    monotonic-clock deadline aborts long runs with EmbedTimeout.
    """
    seq = list(order)
    if sorted(seq) != list(range(logical.node_count)):
        raise ValueError("order must be a permutation of the logical nodes")
    phi = Embedding()
    for a in seq:
        if deadline is not None and time.monotonic() > deadline:
            raise EmbedTimeout(f"deadline exceeded after {phi.size} qubits")
        phi = state_transition(logical, hardware, phi, a)
    return phi, phi.size


def write_embedding(phi: "Embedding | Mapping[int, Iterable[int]]", path) -> None:
    """Write ``s <total>`` then one ``m <v> <u...>`` line per logical node."""
    chains = _as_chain_dict(phi)
    total = sum(len(c) for c in chains.values())
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(f"s {total}\n")
        for v in sorted(chains):
            fp.write(f"m {v} {' '.join(str(u) for u in chains[v])}\n")


def read_embedding(path) -> tuple[dict[int, list[int]], int]:
    """Read an embedding file; returns (chains, declared total).

    The result is a raw mapping so that infeasible files can still be
    loaded and diagnosed with validate().
    """
    chains: dict[int, list[int]] = {}
    declared = None
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "s":
                if declared is not None or len(parts) != 2:
                    raise ValueError(f"line {line_no}: malformed size header")
                declared = int(parts[1])
            elif parts[0] == "m":
                if len(parts) < 2:
                    raise ValueError(f"line {line_no}: malformed chain line")
                v = int(parts[1])
                if v in chains:
                    raise ValueError(f"line {line_no}: duplicate chain for node {v}")
                chains[v] = [int(x) for x in parts[2:]]
            else:
                raise ValueError(f"line {line_no}: unknown line tag {parts[0]!r}")
    if declared is None:
        raise ValueError("missing s header")
    return chains, declared
