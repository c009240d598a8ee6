"""Plain-Python reference simulation of the chain embedding construction.

Implements the same placement rules as the package, written without numpy
or scipy: dictionary BFS, explicit loops, and hand-rolled component
labeling. Used by the oracle-equivalence tests to cross-check the
vectorized implementation route.
"""

from collections import deque

INF = 1 << 20
FULL = "exhausted"


def bfs_from_chain(hw, occupied, chain):
    """Distance from every node to ``chain`` through free interiors."""
    dist = {}
    queue = deque()
    for u in chain:
        dist[u] = 0
        queue.append(u)
    while queue:
        x = queue.popleft()
        for y in hw.adj[x]:
            if y in dist or y in occupied:
                continue
            dist[y] = dist[x] + 1
            queue.append(y)
    return dist


def free_boundary(hw, occupied, nodes, extra=()):
    out = set()
    for u in nodes:
        for y in hw.adj[u]:
            if y not in occupied and y not in extra:
                out.add(y)
    return out


def wire(hw, u):
    return (u // hw.shore % 2, u % hw.shore)


def center_distance(hw, u):
    cell = u // (2 * hw.shore)
    row, col = cell // hw.cols, cell % hw.cols
    return abs(2 * row - (hw.rows - 1)) + abs(2 * col - (hw.cols - 1))


def free_degree(hw, occupied, u):
    return sum(1 for y in hw.adj[u] if y not in occupied)


def walk(hw, dist, root, chain, fdeg_occ, avoid=None):
    """Shortest-path walk preferring wire continuation, openness, small id."""
    members = set(chain)
    path = [root]
    current = root
    d = dist.get(root, INF)
    if d >= INF:
        return None
    while d > 1:
        options = [
            y
            for y in hw.adj[current]
            if dist.get(y, INF) == d - 1 and (avoid is None or y not in avoid)
        ]
        if not options:
            return None
        if len(options) > 1:
            here = wire(hw, current)
            current = min(
                options,
                key=lambda y: (wire(hw, y) != here, -free_degree(hw, fdeg_occ, y), y),
            )
        else:
            current = options[0]
        path.append(current)
        d -= 1
    terminal = min(y for y in hw.adj[current] if y in members)
    path.append(terminal)
    return path


def plan(logical, hw, chains, occupied, a, blocked):
    """Placement plan for ``a``: (own chain, {owner: extension}) or None."""
    usable_occ = occupied | blocked
    owners = [w for w in logical.adj[a] if w in chains]
    if not owners:
        best = None
        for u in range(hw.node_count):
            if u in usable_occ:
                continue
            key = (-free_degree(hw, usable_occ, u) * 4096 + center_distance(hw, u), u)
            if best is None or key < best[0]:
                best = (key, u)
        if best is None:
            return None
        return [best[1]], {}
    dists = {w: bfs_from_chain(hw, usable_occ, chains[w]) for w in owners}
    max_degree = hw.shore + 2
    best = None
    for u in range(hw.node_count):
        if u in usable_occ:
            continue
        total = 0
        ok = True
        for w in owners:
            d = dists[w].get(u, INF)
            if d >= INF:
                ok = False
                break
            total += d
        if not ok:
            continue
        key = total * (max_degree + 1) + (max_degree - free_degree(hw, usable_occ, u))
        if best is None or (key, u) < (best[0], best[1]):
            best = (key, u)
    if best is None:
        return None
    root = best[1]

    boundaries = {w: free_boundary(hw, occupied, chains[w]) for w in owners}
    ordered = sorted(owners, key=lambda w: (len(boundaries[w]), w))
    own = [root]
    own_set = {root}
    donated = set()
    extensions = {}
    for i, w in enumerate(ordered):
        pending = set()
        for later in ordered[i + 1 :]:
            pending |= boundaries[later]
        pending -= boundaries[w]
        pending -= own_set
        path = walk(hw, dists[w], root, chains[w], usable_occ, avoid=donated | pending)
        if path is None:
            redo = bfs_from_chain(hw, usable_occ | donated | pending - {root}, chains[w])
            path = walk(hw, redo, root, chains[w], usable_occ) if redo.get(root, INF) < INF else None
        if path is None:
            path = walk(hw, dists[w], root, chains[w], usable_occ, avoid=donated)
        if path is None:
            redo = bfs_from_chain(hw, usable_occ | donated - {root}, chains[w])
            path = walk(hw, redo, root, chains[w], usable_occ) if redo.get(root, INF) < INF else None
        if path is None:
            return None
        interiors = path[1:-1]
        last_claimed = 0
        for k, u in enumerate(interiors):
            if u in own_set:
                last_claimed = k + 1
        for u in interiors[:last_claimed]:
            if u not in own_set:
                own_set.add(u)
                own.append(u)
        tail = interiors[last_claimed:]
        if any(x != a and x not in chains for x in logical.adj[w]):
            half = len(tail) // 2
        else:
            half = len(tail)
        for u in tail[:half]:
            own_set.add(u)
            own.append(u)
        donated.update(tail[half:])
        extensions[w] = tail[half:]
    return own, extensions


def demand_positive(logical, chains, w, a=None):
    return any(x != a and x not in chains for x in logical.adj[w])


def component_labels(hw, occupied):
    labels = {}
    next_label = 0
    for u in range(hw.node_count):
        if u in occupied or u in labels:
            continue
        queue = deque([u])
        labels[u] = next_label
        while queue:
            x = queue.popleft()
            for y in hw.adj[x]:
                if y not in occupied and y not in labels:
                    labels[y] = next_label
                    queue.append(y)
        next_label += 1
    return labels


def component_deficit(logical, hw, chains, occupied):
    needy = {}
    cut_off = set()
    for w in chains:
        if not demand_positive(logical, chains, w):
            continue
        boundary = free_boundary(hw, occupied, chains[w])
        if boundary:
            needy[w] = boundary
        else:
            cut_off.add(w)
    if len(needy) <= 1:
        return cut_off
    labels = component_labels(hw, occupied)
    comps = {w: {labels[y] for y in b} for w, b in needy.items()}
    candidates = set()
    for c in comps.values():
        candidates |= c
    best = None
    for c in sorted(candidates):
        missing = frozenset(w for w in needy if c not in comps[w])
        if best is None or (len(missing), sorted(missing)) < (len(best), sorted(best)):
            best = missing
    return cut_off | set(best)


def newly_walled(logical, hw, chains_pre, occ_pre, chains_post, occ_post, a):
    walled = []
    for w, nodes in chains_post.items():
        if not demand_positive(logical, chains_post, w):
            continue
        if free_boundary(hw, occ_post, nodes):
            continue
        if w != a and not free_boundary(hw, occ_pre, chains_pre[w]):
            continue
        walled.append(w)
    return walled


def continues_wire(hw, chains, v, y):
    w_y = wire(hw, y)
    cell = y // (2 * hw.shore)
    members = set(chains[v])
    for z in hw.adj[y]:
        if z in members and wire(hw, z) == w_y and z // (2 * hw.shore) != cell:
            return True
    return False


def absorb_allowed(logical, hw, chains, occupied, v, y, careful):
    for z in hw.adj[y]:
        w = None
        for cand, nodes in chains.items():
            if z in nodes:
                w = cand
                break
        if w is None or w == v or not demand_positive(logical, chains, w):
            continue
        if free_boundary(hw, occupied, chains[w]) <= {y}:
            return False
    if demand_positive(logical, chains, v):
        gained = {z for z in hw.adj[y] if z not in occupied} - {y}
        if not gained and free_boundary(hw, occupied, chains[v]) <= {y}:
            return False
    if careful:
        chains2 = {w: list(nodes) for w, nodes in chains.items()}
        chains2[v] = chains2[v] + [y]
        if component_deficit(logical, hw, chains2, occupied | {y}):
            return False
    return True


def grow_flood(logical, hw, chains, occupied, careful):
    absorbed = 0
    order = sorted(chains, key=lambda v: (len(free_boundary(hw, occupied, chains[v])), v))
    for v in order:
        candidates = sorted(
            free_boundary(hw, occupied, chains[v]),
            key=lambda y: (
                not continues_wire(hw, chains, v, y),
                -free_degree(hw, occupied, y),
                y,
            ),
        )
        for y in candidates:
            if absorb_allowed(logical, hw, chains, occupied, v, y, careful):
                chains[v].append(y)
                occupied.add(y)
                absorbed += 1
                break
    return absorbed


def grow_directed(logical, hw, chains, occupied, wanted, careful):
    free = [u for u in range(hw.node_count) if u not in occupied]
    if not free:
        return 0
    dists = [bfs_from_chain(hw, occupied, chains[w]) for w in wanted]
    best = None
    for u in free:
        reach = sum(1 for d in dists if d.get(u, INF) < INF)
        total = sum(min(d.get(u, INF), 64) for d in dists)
        key = -reach * (1 << 40) + total * 8 + (hw.shore + 2 - free_degree(hw, occupied, u))
        if best is None or (key, u) < (best[0], best[1]):
            best = (key, u)
    meet = best[1]
    toward = bfs_from_chain(hw, occupied, [meet])
    absorbed = 0
    for j, w in enumerate(wanted):
        if dists[j].get(meet, INF) <= 1:
            continue
        candidates = sorted(
            free_boundary(hw, occupied, chains[w]) - {meet},
            key=lambda y: (toward.get(y, INF), -free_degree(hw, occupied, y), y),
        )
        for y in candidates:
            if toward.get(y, INF) < INF and absorb_allowed(logical, hw, chains, occupied, w, y, careful):
                chains[w].append(y)
                occupied.add(y)
                absorbed += 1
                break
    return absorbed


def topology_adapt(logical, hw, chains, occupied, targets):
    def one_round(ch, occ, careful):
        if targets:
            wanted = sorted(set(targets) & set(ch))
            if wanted:
                absorbed = grow_directed(logical, hw, ch, occ, wanted, careful)
                if absorbed:
                    return absorbed
        return grow_flood(logical, hw, ch, occ, careful)

    snapshot = ({w: list(nodes) for w, nodes in chains.items()}, set(occupied))
    base = component_deficit(logical, hw, chains, occupied)
    absorbed = one_round(chains, occupied, careful=False)
    if absorbed and component_deficit(logical, hw, chains, occupied) - base:
        chains.clear()
        chains.update(snapshot[0])
        occupied.clear()
        occupied.update(snapshot[1])
        absorbed = one_round(chains, occupied, careful=True)
    if absorbed == 0:
        absorbed = grow_flood(logical, hw, chains, occupied, careful=False)
        if absorbed == 0:
            return FULL
    return absorbed


def plan_transition(logical, hw, chains, occupied, a):
    neighbors = {w for w in logical.adj[a] if w in chains}
    base_deficit = component_deficit(logical, hw, chains, occupied)
    blocked = set()
    fallback = None
    for attempt in range(4):
        result = plan(logical, hw, chains, occupied, a, blocked)
        if result is None:
            break
        own, extensions = result
        chains_post = {w: list(nodes) for w, nodes in chains.items()}
        chains_post[a] = list(own)
        for w, ext in extensions.items():
            chains_post[w] = chains_post[w] + list(ext)
        occ_post = occupied | set(own)
        for ext in extensions.values():
            occ_post |= set(ext)
        walled = set(newly_walled(logical, hw, chains, occupied, chains_post, occ_post, a))
        divided = component_deficit(logical, hw, chains_post, occ_post) - base_deficit
        if not walled and not divided:
            return (chains_post, occ_post), set(), None
        if not walled and fallback is None:
            fallback = (chains_post, occ_post)
        interference = set()
        for w in walled | divided:
            if w != a and w in chains:
                interference |= free_boundary(hw, occupied, chains[w])
        if attempt >= 1:
            interference |= {
                z for y in interference for z in hw.adj[y] if z not in occupied
            }
        if not (interference - blocked):
            return None, neighbors | ((walled | divided) & set(chains)), fallback
        blocked |= interference
    return None, neighbors, fallback


def ref_embed(logical, hw, order):
    """Full reference run; returns (chains, score) or FULL on exhaustion."""
    chains = {}
    occupied = set()
    for a in order:
        rounds = 0
        while True:
            result, grow, fallback = plan_transition(logical, hw, chains, occupied, a)
            if result is not None:
                chains, occupied = result
                break
            if fallback is not None and rounds >= 6:
                chains, occupied = fallback
                break
            targets = grow if rounds % 3 < 2 and grow else None
            if topology_adapt(logical, hw, chains, occupied, targets) == FULL:
                return FULL
            rounds += 1
    return chains, len(occupied)
