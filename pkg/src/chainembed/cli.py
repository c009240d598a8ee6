"""Command line entry point.

Subcommands: gen, embed, explore, validate, bench, oracle, serve-env.
Exit codes: 0 success, 1 infeasible or failed search, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .embedding import (
    EmbedTimeout,
    HardwareExhausted,
    embed_with_order,
    read_embedding,
    validate,
    write_embedding,
)
from .env import serve
from .exploration import baseline_order, greedy_refine, oracle_min_qubits, order_exploration
from .graphs import (
    GraphParseError,
    HardwareGraph,
    generate_ba,
    generate_chimera,
    load_graph,
    save_graph,
)

DEFAULT_HARDWARE = "16x16x4"


def _parse_hardware(text: str) -> HardwareGraph:
    try:
        m, n, l = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"hardware must look like 16x16x4, got {text!r}") from None
    return generate_chimera(m, n, l)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainembed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate graph files")
    gen.add_argument("--kind", choices=["ba", "chimera"], default="ba")
    gen.add_argument("--n", type=int, help="node count (ba)")
    gen.add_argument("--d", type=int, help="attachment degree (ba)")
    gen.add_argument("--count", type=int, default=1, help="number of instances (ba)")
    gen.add_argument("--hardware", type=str, default=DEFAULT_HARDWARE, help="MxNxL (chimera)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output file, or directory when count > 1")

    emb = sub.add_parser("embed", help="embed a graph under an order strategy")
    emb.add_argument("--graph", required=True)
    emb.add_argument("--hardware", type=str, default=DEFAULT_HARDWARE)
    emb.add_argument("--strategy", choices=["random", "degree"], default="degree")
    emb.add_argument("--seed", type=int, default=0)
    emb.add_argument("--out", help="write the embedding here")

    val = sub.add_parser("validate", help="check an embedding file")
    val.add_argument("--graph", required=True)
    val.add_argument("--hardware", type=str, default=DEFAULT_HARDWARE)
    val.add_argument("--embedding", required=True)

    orc = sub.add_parser("oracle", help="brute-force the best order of a small graph")
    orc.add_argument("--graph", required=True)
    orc.add_argument("--hardware", type=str, default=DEFAULT_HARDWARE)

    exp = sub.add_parser("explore", help="search embedding orders for a graph directory")
    exp.add_argument("--graphs", required=True, help="directory of .graph files")
    exp.add_argument("--hardware", type=str, default=DEFAULT_HARDWARE)
    exp.add_argument("--rounds", type=int, default=200, help="sampling rounds")
    exp.add_argument("--refine-budget", type=int, default=60, help="recursion budget per round")
    exp.add_argument("--greedy-budget", type=int, default=0, help="greedy entry cap; 0 disables the greedy run")
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--workers", type=int, default=1)
    exp.add_argument("--out", required=True, help="output directory")

    ben = sub.add_parser("bench", help="embedding benchmark over generated instances")
    ben.add_argument("--sizes", type=_int_list, default=[20, 40])
    ben.add_argument("--degrees", type=_int_list, default=[2, 3])
    ben.add_argument("--instances", type=int, default=5)
    ben.add_argument("--hardware", type=str, default=DEFAULT_HARDWARE)
    ben.add_argument("--strategies", type=str, default="random,degree")
    ben.add_argument("--time-limit-s", type=float, default=10.0)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--workers", type=int, default=1)
    ben.add_argument("--out", help="write the CSV here instead of stdout")

    srv = sub.add_parser("serve-env", help="serve the environment protocol on stdio")
    srv.add_argument("--socket", help="serve on a unix socket instead of stdio")
    return parser


def cmd_gen(args) -> int:
    if args.kind == "chimera":
        hw = _parse_hardware(args.hardware)
        save_graph(hw, args.out)
        print(f"wrote {args.out}")
        return 0
    if args.n is None or args.d is None:
        print("gen --kind ba requires --n and --d", file=sys.stderr)
        return 2
    if args.count == 1 and not Path(args.out).is_dir():
        save_graph(generate_ba(args.n, args.d, args.seed), args.out)
        print(f"wrote {args.out}")
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        path = out / f"ba_n{args.n}_d{args.d}_s{args.seed}_i{i}.graph"
        save_graph(generate_ba(args.n, args.d, args.seed + i), path)
    print(f"wrote {args.count} graphs to {out}")
    return 0


def cmd_embed(args) -> int:
    logical = load_graph(args.graph)
    hardware = _parse_hardware(args.hardware)
    order = baseline_order(logical, args.strategy, args.seed)
    try:
        phi, score = embed_with_order(logical, hardware, order.sequence)
    except HardwareExhausted:
        print("hardware exhausted", file=sys.stderr)
        return 1
    if args.out:
        write_embedding(phi, args.out)
    print(f"s {score}")
    return 0


def cmd_validate(args) -> int:
    logical = load_graph(args.graph)
    hardware = _parse_hardware(args.hardware)
    chains, declared = read_embedding(args.embedding)
    report = validate(logical, hardware, chains, range(logical.node_count))
    total = sum(len(c) for c in chains.values())
    if declared != total:
        print(f"declared qubit total {declared} differs from actual {total}")
    print(report)
    return 0 if report.feasible and declared == total else 1


def cmd_oracle(args) -> int:
    logical = load_graph(args.graph)
    hardware = _parse_hardware(args.hardware)
    try:
        order, score = oracle_min_qubits(logical, hardware)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(f"s {score}")
    print("o best " + str(score) + " " + " ".join(str(v) for v in order.sequence))
    return 0


def cmd_explore(args) -> int:
    graph_dir = Path(args.graphs)
    if not graph_dir.is_dir():
        print(f"not a directory: {graph_dir}", file=sys.stderr)
        return 2
    paths = sorted(graph_dir.glob("*.graph"))
    if not paths:
        print(f"no .graph files in {graph_dir}", file=sys.stderr)
        return 2
    hardware = _parse_hardware(args.hardware)
    graphs = [load_graph(p) for p in paths]
    names = [p.stem for p in paths]
    baselines = [embed_with_order(g, hardware, baseline_order(g, "degree").sequence)[1] for g in graphs]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    progress_rows: list[tuple[int, str, int]] = []

    def on_round(rnd, i, scores, _potentials):
        progress_rows.append((rnd, names[i], scores[i]))

    orders = order_exploration(
        graphs,
        hardware,
        baselines,
        d_rounds=args.rounds,
        k_limit=args.refine_budget,
        seed=args.seed,
        workers=args.workers,
        on_round=on_round,
    )
    with open(out / "orders.txt", "w", encoding="utf-8") as fp:
        for name, order in zip(names, orders):
            seq = " ".join(str(v) for v in order.sequence)
            fp.write(f"o {name} {order.score} {seq}\n")
    with open(out / "explore_progress.csv", "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(["round", "graph", "score"])
        writer.writerows(progress_rows)

    if args.greedy_budget > 0:
        with open(out / "greedy_progress.csv", "w", newline="", encoding="utf-8") as fp:
            writer = csv.writer(fp)
            writer.writerow(["round", "graph", "score"])
            for name, g in zip(names, graphs):
                rows: list[tuple[int, str, int]] = []
                greedy = greedy_refine(
                    g,
                    hardware,
                    budget=1 << 30,
                    max_entries=args.greedy_budget,
                    on_solution=lambda leaf, score, name=name, rows=rows: rows.append((leaf, name, score)),
                )
                writer.writerows(rows)
                print(f"greedy {name}: s {greedy.score}")
    for name, order in zip(names, orders):
        print(f"explore {name}: s {order.score}")
    return 0


def _bench_one(job) -> tuple[int, int, str, bool, int, float]:
    n, d, seed, strategy, hw_dims, limit = job
    logical = generate_ba(n, d, seed)
    hardware = generate_chimera(*hw_dims)
    order = baseline_order(logical, strategy, seed)
    start = time.monotonic()
    try:
        _, score = embed_with_order(logical, hardware, order.sequence, deadline=start + limit)
    except (HardwareExhausted, EmbedTimeout):
        return n, d, strategy, False, 0, (time.monotonic() - start) * 1000.0
    elapsed = (time.monotonic() - start) * 1000.0
    ok = elapsed <= limit * 1000.0
    return n, d, strategy, ok, score, elapsed


def cmd_bench(args) -> int:
    if args.instances < 1:
        print("--instances must be >= 1", file=sys.stderr)
        return 2
    if args.time_limit_s <= 0:
        print("--time-limit-s must be positive", file=sys.stderr)
        return 2
    strategies = [s for s in args.strategies.split(",") if s]
    hw = _parse_hardware(args.hardware)
    hw_dims = (hw.rows, hw.cols, hw.shore)
    jobs = [
        (n, d, args.seed + i, strategy, hw_dims, args.time_limit_s)
        for n in args.sizes
        for d in args.degrees
        for i in range(args.instances)
        for strategy in strategies
    ]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_bench_one, jobs))
    else:
        results = [_bench_one(job) for job in jobs]

    cells: dict[tuple[int, int, str], list[tuple[bool, int, float]]] = {}
    for n, d, strategy, ok, score, ms in results:
        cells.setdefault((n, d, strategy), []).append((ok, score, ms))
    rows = []
    for (n, d, strategy), entries in sorted(cells.items()):
        oks = [e for e in entries if e[0]]
        mean_qubits = sum(e[1] for e in oks) / len(oks) if oks else float("nan")
        mean_ms = sum(e[2] for e in entries) / len(entries)
        success = len(oks) / len(entries)
        rows.append((n, d, strategy, f"{mean_qubits:.2f}", f"{mean_ms:.2f}", f"{success:.3f}"))

    dest = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(dest)
        writer.writerow(["n", "d", "strategy", "mean_qubits", "mean_time_ms", "success_rate"])
        writer.writerows(rows)
    finally:
        if args.out:
            dest.close()
    return 0


def cmd_serve_env(args) -> int:
    if args.socket:
        import socketserver

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                serve(
                    (line.decode("utf-8") for line in self.rfile),
                    _SocketWriter(self.wfile),
                )

        class Server(socketserver.ThreadingUnixStreamServer):
            daemon_threads = True

        with Server(args.socket, Handler) as server:
            server.serve_forever()
        return 0
    serve(sys.stdin, sys.stdout)
    return 0


class _SocketWriter:
    def __init__(self, wfile):
        self._wfile = wfile

    def write(self, text: str) -> None:
        self._wfile.write(text.encode("utf-8"))

    def flush(self) -> None:
        self._wfile.flush()


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "gen": cmd_gen,
        "embed": cmd_embed,
        "validate": cmd_validate,
        "oracle": cmd_oracle,
        "explore": cmd_explore,
        "bench": cmd_bench,
        "serve-env": cmd_serve_env,
    }
    try:
        return handlers[args.command](args)
    except GraphParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
