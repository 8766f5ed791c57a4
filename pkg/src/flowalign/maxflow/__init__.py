"""Max-flow solving, residual min-cut recovery, and slow test oracles.

The push-relabel kernel has two interchangeable backends: a compiled
extension (built from _solver_cy.pyx) and a pure-Python fallback. Import
picks the compiled one when present; `backend=` forces a choice.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..flownet import SINK, SOURCE, FlowNetwork, network_from_arcs

from . import _pure

try:
    from . import _solver_cy
except ImportError:  # extension not built; fall back to pure Python
    _solver_cy = None

DEFAULT_BACKEND = "compiled" if _solver_cy is not None else "pure"


class MalformedNetworkError(ValueError):
    """Raised when a network violates the paired-arc residual contract."""


class InconsistentFlowError(RuntimeError):
    """Raised when a claimed maximum flow leaves the sink reachable."""


class DimacsFormatError(ValueError):
    """Raised on malformed DIMACS max-flow input."""


@dataclass
class FlowResult:
    """A maximum flow: its value plus per-arc remaining capacities."""

    flow_value: int
    residual: np.ndarray

    def arc_flow(self, net: FlowNetwork) -> np.ndarray:
        """Flow carried by each arc (forward arcs only are meaningful)."""
        return net.cap - self.residual


@dataclass
class CutSet:
    """Canonical minimum cut: the source-reachable residual side.

    cut_arcs holds indices of forward arcs from s_side to its complement;
    their capacities sum to the max-flow value exactly. Endpoint node ids
    are copied out so downstream consumers don't need the network.
    """

    s_side: np.ndarray
    cut_arcs: np.ndarray
    cut_capacity: int
    cut_tails: np.ndarray
    cut_heads: np.ndarray
    cut_caps: np.ndarray


def validate_network(net: FlowNetwork) -> None:
    """Check the paired-arc residual representation; raise if broken."""
    E = net.arc_count
    if net.adj_start.shape[0] != net.node_count + 1:
        raise MalformedNetworkError("adjacency index length != node_count + 1")
    if net.adj_start[0] != 0 or net.adj_start[-1] != E:
        raise MalformedNetworkError("adjacency index does not span the arc array")
    if np.any(np.diff(net.adj_start) < 0):
        raise MalformedNetworkError("adjacency index not monotone")
    if np.any(net.cap < 0):
        raise MalformedNetworkError("negative capacity")
    if E:
        r = net.rev
        if r.min() < 0 or r.max() >= E:
            raise MalformedNetworkError("reverse-arc index out of range")
        if not np.array_equal(r[r], np.arange(E)):
            raise MalformedNetworkError("unpaired arcs: rev is not an involution")
        if not (np.array_equal(net.head[r], net.tail) and np.array_equal(net.tail[r], net.head)):
            raise MalformedNetworkError("unpaired arcs: reverse arc endpoints do not mirror")
        # tails must agree with the adjacency slices
        owner = np.searchsorted(net.adj_start, np.arange(E), side="right") - 1
        if not np.array_equal(owner, net.tail):
            raise MalformedNetworkError("arc tails disagree with adjacency index")


def push_relabel_max_flow(net: FlowNetwork, backend: str = None) -> FlowResult:
    """Solve max flow from node 0 (source) to node 1 (sink).

    backend picks the kernel: "compiled", "pure", or None for the best
    available. Both kernels implement highest-label push-relabel with the
    gap heuristic and periodic global relabeling and return bit-identical
    residuals.
    """
    validate_network(net)
    if backend is None:
        backend = DEFAULT_BACKEND
    if backend == "compiled":
        if _solver_cy is None:
            raise RuntimeError("compiled solver backend is not available")
        kernel = _solver_cy.solve
    elif backend == "pure":
        kernel = _pure.solve
    else:
        raise ValueError(f"unknown backend {backend!r}")
    flow_value, residual = kernel(
        net.node_count, net.adj_start, net.head, net.cap, net.rev, SOURCE, SINK
    )
    return FlowResult(int(flow_value), residual)


def min_cut_from_residual(net: FlowNetwork, result: FlowResult) -> CutSet:
    """Recover the canonical min cut from a solved network.

    s_side is the set of nodes reachable from the source through positive
    residual capacity; it is the unique minimal min-cut side, so both
    backends and any correct solver produce the same cut.
    """
    res = result.residual
    s_side = np.zeros(net.node_count, dtype=bool)
    s_side[SOURCE] = True
    q = deque([SOURCE])
    adj = net.adj_start
    while q:
        v = q.popleft()
        for a in range(adj[v], adj[v + 1]):
            if res[a] > 0:
                w = int(net.head[a])
                if not s_side[w]:
                    s_side[w] = True
                    q.append(w)
    if s_side[SINK]:
        raise InconsistentFlowError("sink reachable in residual graph: flow not maximal")
    crossing = s_side[net.tail] & ~s_side[net.head] & net.is_forward
    cut_arcs = np.nonzero(crossing)[0]
    cut_capacity = int(net.cap[cut_arcs].sum())
    if np.any(res[cut_arcs] != 0):
        raise InconsistentFlowError("unsaturated arc crosses the residual cut")
    return CutSet(s_side, cut_arcs, cut_capacity,
                  net.tail[cut_arcs], net.head[cut_arcs], net.cap[cut_arcs])


def ford_fulkerson_oracle(net: FlowNetwork) -> int:
    """Shortest-augmenting-path max flow; slow, simple, independent."""
    validate_network(net)
    res = net.cap.copy()
    adj = net.adj_start
    head = net.head
    rev = net.rev
    n = net.node_count
    flow = 0
    while True:
        parent_arc = np.full(n, -1, dtype=np.int64)
        seen = np.zeros(n, dtype=bool)
        seen[SOURCE] = True
        q = deque([SOURCE])
        while q and not seen[SINK]:
            v = q.popleft()
            for a in range(adj[v], adj[v + 1]):
                w = int(head[a])
                if res[a] > 0 and not seen[w]:
                    seen[w] = True
                    parent_arc[w] = a
                    q.append(w)
        if not seen[SINK]:
            return flow
        bottleneck = None
        v = SINK
        while v != SOURCE:
            a = int(parent_arc[v])
            r = int(res[a])
            bottleneck = r if bottleneck is None or r < bottleneck else bottleneck
            v = int(net.tail[a])
        v = SINK
        while v != SOURCE:
            a = int(parent_arc[v])
            res[a] -= bottleneck
            res[rev[a]] += bottleneck
            v = int(net.tail[a])
        flow += bottleneck


def exhaustive_min_cut(net: FlowNetwork):
    """Enumerate every s-t partition and return (min value, minimal s_side).

    Only for small graphs. Among all minimum cuts, the intersection of the
    minimizing source sides is itself minimizing (cut capacity is submodular),
    which is exactly the canonical source-reachable side.
    """
    inner = [v for v in range(net.node_count) if v not in (SOURCE, SINK)]
    h = len(inner)
    if h > 20:
        raise ValueError(f"{h} free nodes is too many to enumerate")
    masks = np.arange(1 << h, dtype=np.int64)
    total = np.zeros(1 << h, dtype=np.int64)
    pos = {v: i for i, v in enumerate(inner)}
    fwd = np.nonzero(net.is_forward)[0]
    for a in fwd:
        t, hd_, c = int(net.tail[a]), int(net.head[a]), int(net.cap[a])
        if c == 0:
            continue
        if t == SOURCE:
            t_in = np.ones(1 << h, dtype=bool)
        elif t == SINK:
            t_in = np.zeros(1 << h, dtype=bool)
        else:
            t_in = (masks >> pos[t]) & 1 == 1
        if hd_ == SOURCE:
            h_in = np.ones(1 << h, dtype=bool)
        elif hd_ == SINK:
            h_in = np.zeros(1 << h, dtype=bool)
        else:
            h_in = (masks >> pos[hd_]) & 1 == 1
        total += c * (t_in & ~h_in)
    best = int(total.min())
    argmins = np.nonzero(total == best)[0]
    joint = int(argmins[0])
    for m in argmins[1:]:
        joint &= int(m)
    s_side = np.zeros(net.node_count, dtype=bool)
    s_side[SOURCE] = True
    for v, i in pos.items():
        if (joint >> i) & 1:
            s_side[v] = True
    return best, s_side


def read_dimacs(source) -> FlowNetwork:
    """Parse DIMACS max-flow text into a FlowNetwork.

    Node ids are remapped so the declared source becomes node 0 and the
    sink node 1; remaining ids keep their relative order.
    """
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("ascii")
    n_nodes = None
    src = snk = None
    arcs = []
    for ln, line in enumerate(data.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if len(parts) != 4 or parts[1] != "max":
                raise DimacsFormatError(f"line {ln}: malformed problem line")
            n_nodes = int(parts[2])
        elif parts[0] == "n":
            if len(parts) != 3 or parts[2] not in ("s", "t"):
                raise DimacsFormatError(f"line {ln}: malformed node descriptor")
            if parts[2] == "s":
                src = int(parts[1]) - 1
            else:
                snk = int(parts[1]) - 1
        elif parts[0] == "a":
            if len(parts) != 4:
                raise DimacsFormatError(f"line {ln}: malformed arc descriptor")
            arcs.append((int(parts[1]) - 1, int(parts[2]) - 1, int(parts[3])))
        else:
            raise DimacsFormatError(f"line {ln}: unknown record {parts[0]!r}")
    if n_nodes is None:
        raise DimacsFormatError("missing problem line")
    if src is None or snk is None:
        raise DimacsFormatError("missing source or sink descriptor")
    if src == snk:
        raise DimacsFormatError("source and sink coincide")
    remap = {src: SOURCE, snk: SINK}
    nxt = 2
    for v in range(n_nodes):
        if v not in remap:
            remap[v] = nxt
            nxt += 1
    remapped = [(remap[t], remap[h], c) for t, h, c in arcs]
    return network_from_arcs(n_nodes, remapped)
