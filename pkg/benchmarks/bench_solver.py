"""Benchmark the two max-flow backends on alignment-sized networks.

Builds networks from random descriptor sequences, times each backend on
the same instance (best of N repeats), and prints a table with the
speedup. Flow values are cross-checked so a fast-but-wrong backend
cannot win.
"""

import argparse
import time

import numpy as np

from flowalign.costvol import SequenceSet, build_cost_volume
from flowalign.flownet import build_network
from flowalign.maxflow import DEFAULT_BACKEND, push_relabel_max_flow


def parse_size(token):
    m, _, n = token.partition("x")
    return int(m), int(n or "1")


def build_instance(m, n_refs, k_max, eta, dim, rng):
    test = rng.normal(size=(m, dim))
    refs = [rng.normal(size=(m, dim)) for _ in range(n_refs)]
    vol = build_cost_volume(SequenceSet(test, refs), k_max=k_max)
    return build_network(vol, eta=eta)


def time_backend(net, backend, repeats):
    best = float("inf")
    value = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        value = push_relabel_max_flow(net, backend=backend).flow_value
        best = min(best, time.perf_counter() - t0)
    return best, value


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="time the pure and compiled max-flow backends")
    parser.add_argument("--sizes", default="100x1,400x1,600x2",
                        help="comma list of <test frames>x<references>")
    parser.add_argument("--kmax", type=int, default=5)
    parser.add_argument("--eta", type=float, default=0.01)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    have_compiled = DEFAULT_BACKEND == "compiled"
    if not have_compiled:
        print("note: compiled extension not built, timing the pure backend only")
    rng = np.random.default_rng(args.seed)

    header = f"{'size':>8} {'nodes':>7} {'arcs':>8} {'pure':>10}"
    if have_compiled:
        header += f" {'compiled':>10} {'speedup':>8}"
    print(header)
    for token in args.sizes.split(","):
        m, n_refs = parse_size(token.strip())
        net = build_instance(m, n_refs, args.kmax, args.eta, args.dim, rng)
        arcs = int(net.is_forward.sum())
        pure_t, pure_v = time_backend(net, "pure", args.repeats)
        row = f"{token.strip():>8} {net.node_count:>7} {arcs:>8} {pure_t:>9.3f}s"
        if have_compiled:
            comp_t, comp_v = time_backend(net, "compiled", args.repeats)
            if comp_v != pure_v:
                raise SystemExit(
                    f"backend mismatch on {token}: pure {pure_v}, compiled {comp_v}")
            row += f" {comp_t:>9.3f}s {pure_t / comp_t:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
