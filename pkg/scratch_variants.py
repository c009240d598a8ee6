"""Scratch experiment: tie-break variants for chain planning robustness."""

import time

import numpy as np

import chainembed as ce
from chainembed.embedding import (
    INF,
    CleanPath,
    Embedding,
    HardwareExhausted,
    chain_distances,
    topology_adapting,
)


def make_planner(first_node, root_tb, walk_tb):
    def free_degree(hw, free):
        return hw.sparse_adj().dot(free.astype(np.float32)).astype(np.int32)

    def walk(hw, dist_col, root, chain, fdeg):
        members = set(chain)
        path = [root]
        current = root
        d = int(dist_col[root])
        while d > 1:
            opts = [y for y in hw.adj[current] if dist_col[y] == d - 1]
            if walk_tb == "freedeg":
                current = min(opts, key=lambda y: (-fdeg[y], y))
            else:
                current = min(opts)
            path.append(current)
            d -= 1
        terminal = min(y for y in hw.adj[current] if y in members)
        path.append(terminal)
        return path

    def plan(P, H, phi, v):
        owners = [w for w in P.adj[v] if w in phi.chains]
        occ = phi.occupied_mask(H.node_count)
        free = ~occ
        fdeg = free_degree(H, free)
        if not owners:
            if not free.any():
                return None
            if first_node == "center":
                rows = np.array([H.cell_of(u)[0] for u in range(H.node_count)])
                cols = np.array([H.cell_of(u)[1] for u in range(H.node_count)])
                cr, cc = (H.rows - 1) / 2, (H.cols - 1) / 2
                dist_c = np.abs(rows - cr) + np.abs(cols - cc)
                keys = np.where(free, fdeg * 1000 - dist_c, -1)
                root = int(np.argmax(keys))
            else:
                keys = np.where(free, fdeg, -1)
                root = int(np.argmax(keys))
            return [root]
        D = chain_distances(H, occ, [phi.chains[w] for w in owners])
        valid = free & (D < INF).all(axis=1)
        if not valid.any():
            return None
        totals = D.sum(axis=1, dtype=np.int64)
        if root_tb == "freedeg":
            key = totals * 100000 - fdeg
            key[~valid] = np.iinfo(np.int64).max
            root = int(np.argmin(key))
        else:
            totals2 = totals.copy()
            totals2[~valid] = np.iinfo(np.int64).max
            root = int(np.argmin(totals2))
        chain = [root]
        taken = {root}
        for j, w in enumerate(owners):
            p = walk(H, D[:, j], root, phi.chains[w], fdeg)
            for u in p[1:-1]:
                if u not in taken:
                    taken.add(u)
                    chain.append(u)
        return chain

    def transition(P, H, phi, a):
        current = phi
        rounds = 0
        while True:
            c = plan(P, H, current, a)
            if c is not None:
                nxt = current.copy() if current is phi else current
                nxt.assign(a, c)
                return nxt, rounds
            current = topology_adapting(H, current)
            rounds += 1

    def embed(P, H, order):
        phi = Embedding()
        adapt = 0
        for a in order:
            phi, r = transition(P, H, phi, a)
            adapt += r
        return phi, adapt

    return embed


def run(variant_name, embed, cases, H):
    ok = fail = 0
    total_q = 0
    adapts = 0
    t0 = time.monotonic()
    for P, order in cases:
        try:
            phi, a = embed(P, H, order)
            rep = ce.validate(P, H, phi, range(P.node_count))
            assert rep.feasible, rep
            ok += 1
            total_q += phi.size
            adapts += a
        except HardwareExhausted:
            fail += 1
    dt = time.monotonic() - t0
    mq = total_q / ok if ok else float("nan")
    print(f"{variant_name:40s} ok={ok:3d} fail={fail:3d} mean_q={mq:7.1f} adapts={adapts:4d} {dt:6.1f}s")


def main():
    H = ce.generate_chimera(16, 16, 4)
    cases = []
    idx = 0
    for n in (10, 20, 30, 40, 50, 60):
        for d in (2, 5):
            for i in range(3):
                P = ce.generate_ba(n, d, seed=100 + idx)
                idx += 1
                for strat, s in (("degree", 0), ("random", idx)):
                    cases.append((P, ce.baseline_order(P, strat, seed=s).sequence))
    print(f"{len(cases)} cases on C(16,16,4)")
    variants = [
        ("v0 id/id/id", make_planner("min_id", "id", "id")),
        ("v1 center/id/id", make_planner("center", "id", "id")),
        ("v2 center/freedeg/id", make_planner("center", "freedeg", "id")),
        ("v3 center/freedeg/freedeg", make_planner("center", "freedeg", "freedeg")),
        ("v4 min_id/freedeg/freedeg", make_planner("min_id", "freedeg", "freedeg")),
        ("v5 min_id/id/freedeg", make_planner("min_id", "id", "freedeg")),
    ]
    for name, embed in variants:
        run(name, embed, cases, H)


if __name__ == "__main__":
    main()
