"""Search over embedding orders: lower bound, refining, exploration, baselines.

The efficiency score of an order is the number of qubits the final
embedding occupies. Refining searches suffixes recursively, pruning with
a lower bound that charges every remaining node its cheapest possible
chain at the current state; exploration spreads a refinement budget over
a pool of graphs, sampling each in proportion to how much its best order
still lags a baseline.
"""

from __future__ import annotations

import itertools
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from .embedding import (
    Embedding,
    HardwareExhausted,
    PlanContext,
    embed_with_order,
    state_transition,
    state_transition_info,
)
from .graphs import HardwareGraph, LogicalGraph

_FAILED_COST = 1 << 30

__all__ = [
    "EmbeddingOrder",
    "PotentialScores",
    "lower_bound",
    "order_refining",
    "order_exploration",
    "greedy_refine",
    "baseline_order",
    "oracle_min_qubits",
]


@dataclass(frozen=True)
class EmbeddingOrder:
    """A permutation of the logical nodes, optionally with its score."""

    sequence: tuple[int, ...]
    score: int | None = None


@dataclass
class PotentialScores:
    """Per-graph sampling weights and the baseline scores they normalize against."""

    potentials: list[float]
    baselines: list[int]

    def probabilities(self) -> list[float]:
        total = sum(self.potentials)
        return [m / total for m in self.potentials]


def _child_costs(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
) -> dict[int, tuple[int, "Embedding | None"]]:
    """Qubit cost of embedding each unembedded node on top of ``phi``.

    The cost is what a state transition would charge at this state,
    including any hypothetical adaptation rounds an isolated node would
    force (those are simulated, and the resulting embedding returned
    alongside so callers can apply that child without recomputing).
    """
    remaining = [v for v in range(logical.node_count) if v not in phi.chains]
    ctx = PlanContext(logical, hardware, phi)
    ctx.prepare(remaining)
    out: dict[int, tuple[int, Embedding | None]] = {}
    for v in remaining:
        cost = ctx.consumption(v)
        if cost is not None:
            out[v] = (cost, None)
        else:
            try:
                grown, _ = state_transition_info(logical, hardware, phi, v)
            except HardwareExhausted:
                out[v] = (_FAILED_COST, None)
                continue
            out[v] = (grown.size - phi.size, grown)
    return out


def _apply_child(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
    v: int,
    payload: "Embedding | None",
) -> Embedding:
    if payload is not None:
        return payload
    return state_transition(logical, hardware, phi, v)


def score_or_cap(logical: LogicalGraph, hardware: HardwareGraph, order: Sequence[int]) -> int:
    """Efficiency score of an order; orders that exhaust the hardware are
    charged one more qubit than the hardware has, so any feasible order
    beats them."""
    try:
        return embed_with_order(logical, hardware, order)[1]
    except HardwareExhausted:
        return hardware.node_count + 1


def lower_bound(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    phi: Embedding,
    prefix: Sequence[int],
    t: int,
) -> int:
    """Lower bound on the score of every order extending ``prefix``.

    Equals the current qubit count plus, for each unembedded node, the
    qubits a state transition would charge for it right now. Isolated
    nodes are priced after hypothetical adaptation rounds.
    """
    if t != len(prefix) + 1:
        raise ValueError("t must be one past the prefix length")
    if set(prefix) != set(phi.chains):
        raise ValueError("prefix does not match the embedding")
    costs = _child_costs(logical, hardware, phi)
    return phi.size + sum(cost for cost, _ in costs.values())


def order_refining(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    t: int,
    phi: Embedding,
    prefix: tuple[int, ...],
    k: int,
    zeta: int,
    rng: random.Random,
) -> tuple[bool, tuple[int, ...], int]:
    """Search for a suffix whose completed order scores below ``zeta``.

    Returns (found, suffix, remaining budget). The budget is threaded
    through recursive calls, each entry consuming one unit; candidate
    children at a level are drawn randomly without replacement.
    """
    total = logical.node_count
    if t > total:
        return phi.size < zeta, (), k - 1

    costs = _child_costs(logical, hardware, phi)
    bound = phi.size + sum(cost for cost, _ in costs.values())
    if bound > zeta:
        return False, (), k - 1

    remaining_budget = k
    candidates = list(costs)
    while remaining_budget > 0 and candidates:
        v = candidates.pop(rng.randrange(len(candidates)))
        try:
            child = _apply_child(logical, hardware, phi, v, costs[v][1])
        except HardwareExhausted:
            remaining_budget -= 1
            continue
        found, suffix, remaining_budget = order_refining(
            logical, hardware, t + 1, child, prefix + (v,), remaining_budget - 1, zeta, rng
        )
        if found:
            return True, (v,) + suffix, remaining_budget
    return False, (), remaining_budget


def _weighted_index(rng: random.Random, weights: Sequence[float]) -> int:
    total = sum(weights)
    x = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if x < acc:
            return i
    return len(weights) - 1


def _refine_job(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    k_limit: int,
    zeta: int,
    seed: int,
) -> tuple[int, ...] | None:
    rng = random.Random(seed)
    found, suffix, _ = order_refining(logical, hardware, 1, Embedding(), (), k_limit, zeta, rng)
    return suffix if found else None


def order_exploration(
    graphs: Sequence[LogicalGraph],
    hardware: HardwareGraph,
    baseline_scores: Sequence[int],
    d_rounds: int,
    k_limit: int,
    seed: int = 0,
    workers: int = 1,
    on_round: Callable[[int, int, list[int], PotentialScores], None] | None = None,
) -> list[EmbeddingOrder]:
    """Spread a refining budget over a graph pool, keeping each best order.

    Every graph starts from a seeded random order; for ``d_rounds``
    rounds one graph is sampled with probability proportional to its
    potential score and refined against its current best score. Accepted
    refinements update the potential to best/baseline. With several
    workers, rounds are dispatched in waves and results merged on
    improvement; runs are reproducible only with a single worker.
    """
    if len(baseline_scores) != len(graphs):
        raise ValueError("one baseline score per graph is required")
    if any(b <= 0 for b in baseline_scores):
        raise ValueError("baseline scores must be positive")
    rng = random.Random(seed)
    orders: list[list[int]] = []
    scores: list[int] = []
    for g in graphs:
        perm = list(range(g.node_count))
        rng.shuffle(perm)
        orders.append(perm)
        scores.append(score_or_cap(g, hardware, perm))
    potentials = PotentialScores([float(hardware.node_count)] * len(graphs), list(baseline_scores))

    def accept(i: int, suffix: tuple[int, ...]) -> None:
        new_score = score_or_cap(graphs[i], hardware, suffix)
        if new_score < scores[i]:
            orders[i] = list(suffix)
            scores[i] = new_score
            potentials.potentials[i] = scores[i] / potentials.baselines[i]

    if workers <= 1:
        for rnd in range(d_rounds):
            i = _weighted_index(rng, potentials.potentials)
            suffix = _refine_job(graphs[i], hardware, k_limit, scores[i], rng.randrange(1 << 30))
            if suffix:
                accept(i, suffix)
            if on_round is not None:
                on_round(rnd, i, list(scores), potentials)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rnd = 0
            while rnd < d_rounds:
                wave = min(workers, d_rounds - rnd)
                picked = [_weighted_index(rng, potentials.potentials) for _ in range(wave)]
                futures = [
                    pool.submit(_refine_job, graphs[i], hardware, k_limit, scores[i], rng.randrange(1 << 30))
                    for i in picked
                ]
                for i, fut in zip(picked, futures):
                    suffix = fut.result()
                    if suffix:
                        accept(i, suffix)
                    if on_round is not None:
                        on_round(rnd, i, list(scores), potentials)
                    rnd += 1
    return [EmbeddingOrder(tuple(o), s) for o, s in zip(orders, scores)]


def greedy_refine(
    logical: LogicalGraph,
    hardware: HardwareGraph,
    budget: int,
    max_entries: int | None = None,
    on_solution: Callable[[int, int], None] | None = None,
) -> EmbeddingOrder:
    """Depth-first order search expanding cheapest children first.

    Children are visited in ascending order of the qubits they would add,
    and a branch is cut as soon as its qubit count can no longer beat the
    best complete order found. ``budget`` caps the number of complete
    orders evaluated, so budget 1 is the pure greedy descent;
    ``max_entries`` optionally caps recursion entries for comparisons
    against refining budgets.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    total = logical.node_count
    best_score = [1 << 60]
    best_order: list[tuple[int, ...]] = [()]
    leaves = [0]
    entries = [0]

    def stopped() -> bool:
        return leaves[0] >= budget or (max_entries is not None and entries[0] >= max_entries)

    def descend(phi: Embedding, prefix: tuple[int, ...]) -> None:
        entries[0] += 1
        if len(prefix) == total:
            leaves[0] += 1
            if phi.size < best_score[0]:
                best_score[0] = phi.size
                best_order[0] = prefix
                if on_solution is not None:
                    on_solution(leaves[0], phi.size)
            return
        if phi.size >= best_score[0]:
            return
        costs = _child_costs(logical, hardware, phi)
        for v in sorted(costs, key=lambda v: (costs[v][0], v)):
            if stopped():
                return
            if phi.size + costs[v][0] >= best_score[0]:
                break
            try:
                child = _apply_child(logical, hardware, phi, v, costs[v][1])
            except HardwareExhausted:
                continue
            descend(child, prefix + (v,))

    descend(Embedding(), ())
    return EmbeddingOrder(best_order[0], best_score[0])


def baseline_order(logical: LogicalGraph, strategy: str, seed: int = 0) -> EmbeddingOrder:
    """Random or highest-degree-first baseline orders; ties to the smallest id."""
    nodes = list(range(logical.node_count))
    if strategy == "random":
        rng = random.Random(seed)
        rng.shuffle(nodes)
    elif strategy == "degree":
        nodes.sort(key=lambda v: (-logical.degree(v), v))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return EmbeddingOrder(tuple(nodes))


def oracle_min_qubits(logical: LogicalGraph, hardware: HardwareGraph) -> tuple[EmbeddingOrder, int]:
    """Brute-force minimum score over every permutation (at most 8 nodes)."""
    if logical.node_count > 8:
        raise ValueError("factorial enumeration is limited to 8 nodes")
    best: tuple[int, tuple[int, ...]] | None = None
    for perm in itertools.permutations(range(logical.node_count)):
        _, score = embed_with_order(logical, hardware, perm)
        if best is None or score < best[0]:
            best = (score, perm)
    assert best is not None
    return EmbeddingOrder(best[1], best[0]), best[0]
